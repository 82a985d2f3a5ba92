#include "coldrec/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace coldrec::ad {

Var Tape::push(Mat value, std::function<void(Tape&)> back) {
    values_.push_back(std::move(value));
    grads_.emplace_back(Mat::Zero(values_.back().rows(), values_.back().cols()));
    backward_ops_.push_back(std::move(back));
    return Var{static_cast<int>(values_.size()) - 1};
}

Var Tape::leaf(Mat value, bool) {
    return push(std::move(value), nullptr);
}

Var Tape::matmul(Var a, Var b) {
    Mat out = values_[a.id] * values_[b.id];
    return push(std::move(out), [a, b, o = static_cast<int>(values_.size())](Tape& t) {
        const Mat& go = t.grads_[o];
        t.g(a) += go * t.values_[b.id].transpose();
        t.g(b) += t.values_[a.id].transpose() * go;
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    Mat out = values_[a.id] * values_[b.id].transpose();
    return push(std::move(out), [a, b, o = static_cast<int>(values_.size())](Tape& t) {
        const Mat& go = t.grads_[o];
        t.g(a) += go * t.values_[b.id];
        t.g(b) += go.transpose() * t.values_[a.id];
    });
}

Var Tape::spmm(const SpMat& s, Var b) {
    Mat out = s * values_[b.id];
    SpMat st = s.transpose();
    return push(std::move(out), [b, st, o = static_cast<int>(values_.size())](Tape& t) {
        t.g(b) += st * t.grads_[o];
    });
}

Var Tape::add(Var a, Var b) {
    Mat out = values_[a.id] + values_[b.id];
    return push(std::move(out), [a, b, o = static_cast<int>(values_.size())](Tape& t) {
        t.g(a) += t.grads_[o];
        t.g(b) += t.grads_[o];
    });
}

Var Tape::sub(Var a, Var b) {
    Mat out = values_[a.id] - values_[b.id];
    return push(std::move(out), [a, b, o = static_cast<int>(values_.size())](Tape& t) {
        t.g(a) += t.grads_[o];
        t.g(b) -= t.grads_[o];
    });
}

Var Tape::add_rowvec(Var a, Var bias) {
    Mat out = values_[a.id].rowwise() + values_[bias.id].row(0);
    return push(std::move(out), [a, bias, o = static_cast<int>(values_.size())](Tape& t) {
        t.g(a) += t.grads_[o];
        t.g(bias).row(0) += t.grads_[o].colwise().sum();
    });
}

Var Tape::scale(Var a, double c) {
    Mat out = values_[a.id] * c;
    return push(std::move(out), [a, c, o = static_cast<int>(values_.size())](Tape& t) {
        t.g(a) += c * t.grads_[o];
    });
}

Var Tape::tanh_(Var a) {
    Mat out = values_[a.id].array().tanh();
    return push(std::move(out), [a, o = static_cast<int>(values_.size())](Tape& t) {
        t.g(a).array() += t.grads_[o].array() * (1.0 - t.values_[o].array().square());
    });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var Tape::gelu(Var a) {
    const Mat& x = values_[a.id];
    Mat out = x.unaryExpr([](double v) {
        return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    });
    return push(std::move(out), [a, o = static_cast<int>(values_.size())](Tape& t) {
        const Mat& x = t.values_[a.id];
        Mat d = x.unaryExpr([](double v) {
            double inner = kGeluC * (v + kGeluA * v * v * v);
            double th = std::tanh(inner);
            double sech2 = 1.0 - th * th;
            return 0.5 * (1.0 + th) + 0.5 * v * sech2 * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        });
        t.g(a).array() += t.grads_[o].array() * d.array();
    });
}

Var Tape::softmax_rows(Var a) {
    Mat out = values_[a.id];
    for (int r = 0; r < out.rows(); ++r) {
        double m = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    return push(std::move(out), [a, o = static_cast<int>(values_.size())](Tape& t) {
        const Mat& y = t.values_[o];
        const Mat& go = t.grads_[o];
        for (int r = 0; r < y.rows(); ++r) {
            double dot = go.row(r).dot(y.row(r));
            t.g(a).row(r).array() += y.row(r).array() * (go.row(r).array() - dot);
        }
    });
}

Var Tape::layer_norm_rows(Var a, Var gain, Var bias) {
    const Mat& x = values_[a.id];
    const int n = static_cast<int>(x.cols());
    Mat xhat(x.rows(), x.cols());
    Eigen::VectorXd sigma(x.rows());
    for (int r = 0; r < x.rows(); ++r) {
        double mu = x.row(r).mean();
        double var = (x.row(r).array() - mu).square().mean();
        sigma(r) = std::sqrt(var + kLayerNormEps);
        xhat.row(r) = (x.row(r).array() - mu) / sigma(r);
    }
    Mat out = (xhat.array().rowwise() * values_[gain.id].row(0).array()).rowwise() +
              values_[bias.id].row(0).array();
    return push(std::move(out),
                [a, gain, bias, xhat, sigma, n, o = static_cast<int>(values_.size())](Tape& t) {
        const Mat& go = t.grads_[o];
        t.g(bias).row(0) += go.colwise().sum();
        t.g(gain).row(0) += (go.array() * xhat.array()).colwise().sum().matrix();
        const auto gain_row = t.values_[gain.id].row(0);
        for (int r = 0; r < go.rows(); ++r) {
            Eigen::RowVectorXd gh = go.row(r).array() * gain_row.array();
            double m1 = gh.mean();
            double m2 = (gh.array() * xhat.row(r).array()).mean();
            t.g(a).row(r) +=
                ((gh.array() - m1 - xhat.row(r).array() * m2) / sigma(r)).matrix();
        }
        (void)n;
    });
}

Var Tape::l2_normalize_rows(Var a) {
    return l2_normalize_rows_or(a, a);
}

Var Tape::l2_normalize_rows_or(Var raw, Var fallback) {
    const Mat& x = values_[raw.id];
    const Mat& f = values_[fallback.id];
    Mat out(x.rows(), x.cols());
    std::vector<char> used_fallback(static_cast<std::size_t>(x.rows()), 0);
    for (int r = 0; r < x.rows(); ++r) {
        double n = x.row(r).norm();
        if (n > kNormEps) {
            out.row(r) = x.row(r) / n;
        } else {
            used_fallback[static_cast<std::size_t>(r)] = 1;
            double fn = f.row(r).norm();
            out.row(r) = fn > kNormEps ? (f.row(r) / fn).eval() : f.row(r);
        }
    }
    return push(std::move(out),
                [raw, fallback, used_fallback, o = static_cast<int>(values_.size())](Tape& t) {
        const Mat& y = t.values_[o];
        const Mat& go = t.grads_[o];
        const Mat& x = t.values_[raw.id];
        const Mat& f = t.values_[fallback.id];
        for (int r = 0; r < y.rows(); ++r) {
            if (!used_fallback[static_cast<std::size_t>(r)]) {
                double n = x.row(r).norm();
                double dot = go.row(r).dot(y.row(r));
                t.g(raw).row(r) += (go.row(r) - dot * y.row(r)) / n;
            } else {
                double fn = f.row(r).norm();
                if (fn > kNormEps) {
                    double dot = go.row(r).dot(y.row(r));
                    t.g(fallback).row(r) += (go.row(r) - dot * y.row(r)) / fn;
                } else {
                    t.g(fallback).row(r) += go.row(r);
                }
            }
        }
    });
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
    const Mat& x = values_[a.id];
    Mat out(static_cast<int>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<int>(r)) = x.row(idx[r]);
    return push(std::move(out),
                [a, idx = std::move(idx), o = static_cast<int>(values_.size())](Tape& t) {
        const Mat& go = t.grads_[o];
        for (std::size_t r = 0; r < idx.size(); ++r)
            t.g(a).row(idx[r]) += go.row(static_cast<int>(r));
    });
}

Var Tape::vstack(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("vstack: empty");
    int rows = 0;
    const int cols = static_cast<int>(values_[parts.front().id].cols());
    for (Var p : parts) rows += static_cast<int>(values_[p.id].rows());
    Mat out(rows, cols);
    int at = 0;
    for (Var p : parts) {
        const Mat& v = values_[p.id];
        out.middleRows(at, static_cast<int>(v.rows())) = v;
        at += static_cast<int>(v.rows());
    }
    return push(std::move(out), [parts, o = static_cast<int>(values_.size())](Tape& t) {
        int at = 0;
        for (Var p : parts) {
            int n = static_cast<int>(t.values_[p.id].rows());
            t.g(p) += t.grads_[o].middleRows(at, n);
            at += n;
        }
    });
}

Var Tape::rows_with_mask(Var source, std::vector<int> idx, std::vector<char> masked,
                         Var mask_token) {
    const Mat& x = values_[source.id];
    const auto& mt = values_[mask_token.id];
    Mat out(static_cast<int>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        out.row(static_cast<int>(r)) = masked[r] ? mt.row(0) : x.row(idx[r]);
    return push(std::move(out),
                [source, idx = std::move(idx), masked = std::move(masked), mask_token,
                 o = static_cast<int>(values_.size())](Tape& t) {
        const Mat& go = t.grads_[o];
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (masked[r])
                t.g(mask_token).row(0) += go.row(static_cast<int>(r));
            else
                t.g(source).row(idx[r]) += go.row(static_cast<int>(r));
        }
    });
}

Var Tape::mean_sq_dist(Var a, Var b) {
    const Mat& x = values_[a.id];
    const Mat& y = values_[b.id];
    if (x.rows() == 0) throw std::invalid_argument("mean_sq_dist: empty");
    double v = (x - y).array().square().rowwise().sum().mean();
    Mat out(1, 1);
    out(0, 0) = v;
    return push(std::move(out), [a, b, o = static_cast<int>(values_.size())](Tape& t) {
        double gs = t.grads_[o](0, 0);
        double n = static_cast<double>(t.values_[a.id].rows());
        Mat d = (2.0 / n) * (t.values_[a.id] - t.values_[b.id]);
        t.g(a) += gs * d;
        t.g(b) -= gs * d;
    });
}

Var Tape::uniformity(Var a) {
    const Mat& x = values_[a.id];
    const int n = static_cast<int>(x.rows());
    if (n < 2) throw std::invalid_argument("uniformity: needs >= 2 rows");
    // Sum over ordered pairs i != j of exp(-2 ||x_i - x_j||^2); symmetric, so
    // compute unordered pairs once and double.
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            sum += 2.0 * std::exp(-2.0 * (x.row(i) - x.row(j)).squaredNorm());
    double mean = sum / (static_cast<double>(n) * (n - 1));
    Mat out(1, 1);
    out(0, 0) = 0.5 * std::log(mean);
    return push(std::move(out), [a, sum, o = static_cast<int>(values_.size())](Tape& t) {
        double gs = t.grads_[o](0, 0);
        const Mat& x = t.values_[a.id];
        const int n = static_cast<int>(x.rows());
        Mat d = Mat::Zero(x.rows(), x.cols());
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double w = std::exp(-2.0 * (x.row(i) - x.row(j)).squaredNorm());
                // d sum / d x_i over both pair orders: 2 * w * (-4)(x_i - x_j)
                Eigen::RowVectorXd delta = -8.0 * w * (x.row(i) - x.row(j));
                d.row(i) += delta;
                d.row(j) -= delta;
            }
        }
        t.g(a) += gs * (0.5 / sum) * d;
    });
}

Var Tape::cross_entropy_rows(Var logits, std::vector<int> labels) {
    const Mat& z = values_[logits.id];
    const int n = static_cast<int>(z.rows());
    Mat probs(z.rows(), z.cols());
    double loss = 0.0;
    for (int r = 0; r < n; ++r) {
        double m = z.row(r).maxCoeff();
        probs.row(r) = (z.row(r).array() - m).exp();
        double s = probs.row(r).sum();
        probs.row(r) /= s;
        loss -= std::log(std::max(probs(r, labels[static_cast<std::size_t>(r)]), 1e-300));
    }
    Mat out(1, 1);
    out(0, 0) = loss / n;
    return push(std::move(out),
                [logits, labels = std::move(labels), probs,
                 o = static_cast<int>(values_.size())](Tape& t) {
        double gs = t.grads_[o](0, 0);
        const int n = static_cast<int>(probs.rows());
        Mat d = probs;
        for (int r = 0; r < n; ++r) d(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
        t.g(logits) += (gs / n) * d;
    });
}

Var Tape::mean_sq_norm(Var a) {
    const Mat& x = values_[a.id];
    if (x.rows() == 0) throw std::invalid_argument("mean_sq_norm: empty");
    Mat out(1, 1);
    out(0, 0) = x.array().square().rowwise().sum().mean();
    return push(std::move(out), [a, o = static_cast<int>(values_.size())](Tape& t) {
        double gs = t.grads_[o](0, 0);
        double n = static_cast<double>(t.values_[a.id].rows());
        t.g(a) += gs * (2.0 / n) * t.values_[a.id];
    });
}

Var Tape::weighted_sum(const std::vector<std::pair<double, Var>>& terms) {
    double v = 0.0;
    for (const auto& [c, t] : terms) v += c * values_[t.id](0, 0);
    Mat out(1, 1);
    out(0, 0) = v;
    return push(std::move(out), [terms, o = static_cast<int>(values_.size())](Tape& t) {
        double gs = t.grads_[o](0, 0);
        for (const auto& [c, term] : terms) t.g(term)(0, 0) += c * gs;
    });
}

void Tape::backward(Var loss) {
    if (values_[loss.id].size() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    grads_[loss.id](0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i)
        if (backward_ops_[static_cast<std::size_t>(i)])
            backward_ops_[static_cast<std::size_t>(i)](*this);
}

}  // namespace coldrec::ad
