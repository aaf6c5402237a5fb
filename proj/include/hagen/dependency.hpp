#pragma once

#include <cstddef>

#include "hagen/autodiff.hpp"
#include "hagen/random.hpp"

namespace hagen {

/// PCA initialization of the crime-category embedding [C x D].
///
/// Each category's training records, flattened over regions and slots, form
/// one row of a C x (N T) matrix. Columns are centered across categories and
/// the top principal components come from power iteration with deflation on
/// the C x C Gram matrix (200 iterations, tolerance 1e-9). Column i of the
/// result is the projection onto component i; columns past the numerical rank
/// are N(0, 0.01^2) noise.
Tensor init_crime_embedding_pca(const Tensor& train_crimes, std::size_t embed_dim, Rng& rng);

struct CrimeEmbedding {
  Parameter* embedding = nullptr;   // [C x D]
  Parameter* transition = nullptr;  // [D x D]
};

CrimeEmbedding init_crime_embedding(ParameterSet& params, Tensor initial, Rng& rng);

/// softmax over categories of E_base * transition * E_c^T, one row per region.
Var inter_dependency(Var region_base, Var crime_embedding, Var transition);

/// W (.) Y_k, with equal shapes required.
Var weight_input(Var dependency, Var slot_records);

/// Repeats each row of `a` `batch` times consecutively, matching the
/// node-major batched layout used by the diffusion layers.
Var repeat_rows(Var a, std::size_t batch);

}  // namespace hagen
