#ifndef FLOWPLAN_OPS_HPP
#define FLOWPLAN_OPS_HPP

// Autodiff primitives for the denoiser network. Each op validates shapes,
// computes its result eagerly and, when the graph records gradients, pushes a
// closure implementing the exact adjoint. The set is deliberately small: just
// what a conditioned transformer with token heads needs.

#include <vector>

#include "flowplan/tensor.hpp"

namespace flowplan {

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);     // [m,k]*[k,n]
Tensor matmul_nt(Graph& g, const Tensor& a, const Tensor& b);  // [m,k]*[n,k]^T
Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor add_scaled(Graph& g, const Tensor& a, const Tensor& b, double cb);  // a + cb*b
Tensor add_bias(Graph& g, const Tensor& a, const Tensor& bias);            // bias: [1,n]
Tensor scale(Graph& g, const Tensor& a, double c);
Tensor gelu(Graph& g, const Tensor& a);
Tensor softmax_rows(Graph& g, const Tensor& a);
Tensor causal_mask(Graph& g, const Tensor& scores);  // entries j > i -> -1e30
Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor embedding(Graph& g, const Tensor& table, const std::vector<int>& ids);
// Like embedding, but id == table.rows() yields a zero row: a masked token
// contributes no content embedding.
Tensor embedding_or_zero(Graph& g, const Tensor& table, const std::vector<int>& ids);
Tensor film(Graph& g, const Tensor& x, const Tensor& sc, const Tensor& sh);  // x*(1+sc)+sh
Tensor slice_rows(Graph& g, const Tensor& x, int start, int len);
Tensor concat_rows(Graph& g, const std::vector<Tensor>& xs);
Tensor slice_cols(Graph& g, const Tensor& x, int start, int len);
Tensor concat_cols(Graph& g, const std::vector<Tensor>& xs);

// Mean over rows with mask[k] != 0 of -log softmax(logits[k])[target[k]];
// 0 when no row is selected.
Tensor masked_cross_entropy(Graph& g, const Tensor& logits, const std::vector<int>& targets,
                            const std::vector<unsigned char>& mask);

// Mean over all rows of the Shannon entropy (natural log) of softmax(row).
Tensor mean_row_entropy(Graph& g, const Tensor& logits);

// Non-differentiating helpers shared by inference paths.
void softmax_row_inplace(double* z, int n);
int argmax_row(const double* z, int n);  // lowest index wins ties

}  // namespace flowplan

#endif  // FLOWPLAN_OPS_HPP
