#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace coldrec::ad {

using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

// Handle into a Tape. Default-constructed handles are invalid.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Dynamic reverse-mode tape over dense matrices. Scalars are 1x1 matrices.
// A tape is built per forward pass and discarded afterwards; parameters are
// registered as leaves with requires_grad = true.
class Tape {
public:
    Var leaf(Mat value, bool requires_grad = false);

    const Mat& value(Var v) const { return values_.at(v.id); }
    // Valid after backward(); zero matrix if the node received no gradient.
    const Mat& grad(Var v) const { return grads_.at(v.id); }
    double scalar(Var v) const { return values_.at(v.id)(0, 0); }

    Var matmul(Var a, Var b);     // A * B
    Var matmul_nt(Var a, Var b);  // A * B^T
    Var spmm(const SpMat& s, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var add_rowvec(Var a, Var bias);  // bias is 1 x cols, broadcast over rows
    Var scale(Var a, double c);
    Var tanh_(Var a);
    Var gelu(Var a);
    Var softmax_rows(Var a);
    Var layer_norm_rows(Var a, Var gain, Var bias);
    Var l2_normalize_rows(Var a);
    // Row-wise normalize `raw`; rows of `raw` with (near-)zero norm fall back
    // to the normalized corresponding row of `fallback`.
    Var l2_normalize_rows_or(Var raw, Var fallback);
    Var gather_rows(Var a, std::vector<int> idx);
    Var vstack(const std::vector<Var>& parts);
    // Row t of the output is mask_token if masked[t], else source.row(idx[t]).
    Var rows_with_mask(Var source, std::vector<int> idx, std::vector<char> masked,
                       Var mask_token);

    // Scalar-valued reductions.
    Var mean_sq_dist(Var a, Var b);                 // mean_i ||a_i - b_i||^2
    Var uniformity(Var a);                          // (1/2) log mean_{i!=j} exp(-2||a_i-a_j||^2)
    Var cross_entropy_rows(Var logits, std::vector<int> labels);
    Var mean_sq_norm(Var a);                        // mean_i ||a_i||^2
    Var weighted_sum(const std::vector<std::pair<double, Var>>& terms);

    // Seeds d(loss)/d(loss) = 1 and runs all backward ops in reverse order.
    void backward(Var loss);

    std::size_t size() const { return values_.size(); }

private:
    static constexpr double kNormEps = 1e-12;
    static constexpr double kLayerNormEps = 1e-8;

    Var push(Mat value, std::function<void(Tape&)> back);
    Mat& g(Var v) { return grads_[v.id]; }

    std::vector<Mat> values_;
    std::vector<Mat> grads_;
    std::vector<std::function<void(Tape&)>> backward_ops_;
};

}  // namespace coldrec::ad
