#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bfs/dataset.hpp"
#include "bfs/errors.hpp"
#include "bfs/network.hpp"
#include "bfs/parallel.hpp"

namespace bfs {

enum class TrainAlgorithm { steepest_descent, levenberg_marquardt };

struct TrainConfig {
    TrainAlgorithm algorithm = TrainAlgorithm::levenberg_marquardt;
    double eta = 0.01;               // steepest-descent learning rate
    int max_iterations = 30;
    double lm_lambda0 = 1e-3;
    double lm_lambda_up = 10.0;
    double lm_lambda_down = 10.0;
    double lm_lambda_max = 1e12;
    std::uint64_t seed = 1;          // weight-init seed (used by callers that build the net)
    int early_stop_patience = 5;     // iterations without test-MSE improvement; <= 0 disables
    int workers = 1;

    void validate() const {
        if (max_iterations < 1) throw domain_error("training needs at least one iteration");
        if (algorithm == TrainAlgorithm::steepest_descent && !(eta >= 0.0))
            throw domain_error("steepest descent learning rate must be >= 0");
        if (algorithm == TrainAlgorithm::levenberg_marquardt &&
            (!(lm_lambda0 > 0.0) || !(lm_lambda_up > 1.0) || !(lm_lambda_down > 1.0)))
            throw domain_error("LM damping controls must be positive (up/down factors > 1)");
    }
};

struct TrainRecord {
    int iteration = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double lambda = 0.0;         // LM only
    double elapsed_seconds = 0.0; // wall clock since training started
};

struct TrainLog {
    std::vector<TrainRecord> records;
    bool early_stopped = false;
    bool stalled = false;        // LM damping cap reached with no acceptable step

    double final_train_mse() const { return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().train_mse; }
    double final_test_mse() const { return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().test_mse; }
};

class training_diverged_error : public error {
public:
    training_diverged_error(const std::string& msg, TrainLog log)
        : error(msg), log_(std::move(log)) {}
    const TrainLog& log() const { return log_; }

private:
    TrainLog log_;
};

inline void save_train_log_csv(const TrainLog& log, const std::string& path, bool is_lm) {
    auto out = open_output(path, std::ios::out);
    out << "iteration,train_mse,test_mse,lambda,elapsed_seconds\n";
    char buf[160];
    for (const auto& r : log.records) {
        if (is_lm)
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.6f\n", r.iteration,
                          r.train_mse, r.test_mse, r.lambda, r.elapsed_seconds);
        else
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,,%.6f\n", r.iteration,
                          r.train_mse, r.test_mse, r.elapsed_seconds);
        out << buf;
    }
    if (!out) throw data_error("failed writing training log: " + path);
}

namespace detail {

inline void check_batch(const Network& net, const Dataset& d) {
    if (d.inputs.cols() == 0) throw domain_error("empty dataset");
    if (d.inputs.rows() != net.input_size())
        throw dimension_error("dataset row count does not match the network input layer");
    if (net.layout.output_size() != 1)
        throw dimension_error("training supports single-output networks");
}

// Per-thread scratch for one forward/backward sweep.
struct NetWorkspace {
    std::vector<Eigen::VectorXd> act;    // act[0] = input, act[L] = output
    std::vector<Eigen::VectorXd> delta;  // delta[l] matches layer l+1's width

    explicit NetWorkspace(const Network& net) {
        const auto& sz = net.layout.sizes;
        act.reserve(sz.size());
        for (int w : sz) act.emplace_back(w);
        for (std::size_t l = 1; l < sz.size(); ++l) delta.emplace_back(sz[l]);
    }
};

inline double forward_into(const Network& net, NetWorkspace& ws, const double* x) {
    const int nl = net.layout.weight_layers();
    ws.act[0] = Eigen::Map<const Eigen::VectorXd>(x, net.input_size());
    for (int l = 0; l < nl; ++l) {
        auto& out = ws.act[static_cast<std::size_t>(l) + 1];
        out.noalias() = net.weights[static_cast<std::size_t>(l)] * ws.act[static_cast<std::size_t>(l)];
        if (net.use_bias) out += net.biases[static_cast<std::size_t>(l)];
        if (l + 1 < nl)
            for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = sigmoid(out(i));
    }
    return ws.act.back()(0);
}

// Backward sweep from an output seed (d cost / d y for gradients, 1 for
// Jacobian rows). Emits per-layer deltas; the caller turns them into
// weight-space quantities.
inline void backward_deltas(const Network& net, NetWorkspace& ws, double output_seed) {
    const int nl = net.layout.weight_layers();
    ws.delta[static_cast<std::size_t>(nl) - 1].setConstant(output_seed);
    for (int l = nl - 1; l > 0; --l) {
        auto& d_prev = ws.delta[static_cast<std::size_t>(l) - 1];
        d_prev.noalias() = net.weights[static_cast<std::size_t>(l)].transpose() *
                           ws.delta[static_cast<std::size_t>(l)];
        const auto& a = ws.act[static_cast<std::size_t>(l)];
        for (Eigen::Index i = 0; i < d_prev.size(); ++i)
            d_prev(i) *= a(i) * (1.0 - a(i));   // sigmoid'(u) from the activation
    }
}

} // namespace detail

// Mean over samples of (1/2J) * sum e_j^2 with e_j = h_j - y_j and J = 1.
inline double batch_mse(const Network& net, const Dataset& d, int workers = 1) {
    net.validate();
    detail::check_batch(net, d);
    const std::size_t n = d.columns();
    constexpr std::size_t kBlock = 1024;  // fixed: keeps the reduction order worker-independent
    const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(n_blocks, 0.0);

    parallel_for_blocks(n, workers, kBlock, [&](std::size_t begin, std::size_t end) {
        detail::NetWorkspace ws(net);
        double acc = 0.0;
        for (std::size_t s = begin; s < end; ++s) {
            const double y = detail::forward_into(net, ws, d.inputs.col(static_cast<Eigen::Index>(s)).data());
            const double e = d.targets(static_cast<Eigen::Index>(s)) - y;
            acc += 0.5 * e * e;
        }
        partial[begin / kBlock] = acc;
    });

    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(n);
}

// Gradient of the batch-summed cost sum_n (1/2) e_n^2 with respect to every
// weight (and bias, when enabled).
struct NetGradient {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    static NetGradient zeros_like(const Network& net) {
        NetGradient g;
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            g.w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
            g.b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        }
        return g;
    }

    void add(const NetGradient& o) {
        for (std::size_t l = 0; l < w.size(); ++l) {
            w[l] += o.w[l];
            b[l] += o.b[l];
        }
    }
};

inline NetGradient backprop_gradient(const Network& net, const Dataset& d, int workers = 1) {
    net.validate();
    detail::check_batch(net, d);
    const std::size_t n = d.columns();
    constexpr std::size_t kBlock = 1024;
    const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<NetGradient> partial(n_blocks);

    parallel_for_blocks(n, workers, kBlock, [&](std::size_t begin, std::size_t end) {
        detail::NetWorkspace ws(net);
        NetGradient g = NetGradient::zeros_like(net);
        const int nl = net.layout.weight_layers();
        for (std::size_t s = begin; s < end; ++s) {
            const double y = detail::forward_into(net, ws, d.inputs.col(static_cast<Eigen::Index>(s)).data());
            const double e = d.targets(static_cast<Eigen::Index>(s)) - y;
            detail::backward_deltas(net, ws, -e);  // d(1/2 e^2)/dy = y - h
            for (int l = 0; l < nl; ++l) {
                g.w[static_cast<std::size_t>(l)].noalias() +=
                    ws.delta[static_cast<std::size_t>(l)] * ws.act[static_cast<std::size_t>(l)].transpose();
                g.b[static_cast<std::size_t>(l)] += ws.delta[static_cast<std::size_t>(l)];
            }
        }
        partial[begin / kBlock] = std::move(g);
    });

    NetGradient total = NetGradient::zeros_like(net);
    for (const auto& p : partial) total.add(p);   // fixed block order
    return total;
}

// Full-batch gradient descent per the update rule w(n+1) = w(n) - eta * de/dw.
inline std::pair<Network, TrainLog> train_steepest_descent(Network net, const Dataset& train,
                                                           const Dataset& test, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.algorithm != TrainAlgorithm::steepest_descent)
        throw config_error("train_steepest_descent called with a different algorithm configured");
    net.validate();
    detail::check_batch(net, train);
    detail::check_batch(net, test);

    TrainLog log;
    const auto t0 = std::chrono::steady_clock::now();
    double best_test = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        const NetGradient g = backprop_gradient(net, train, cfg.workers);
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            net.weights[l] -= cfg.eta * g.w[l];
            if (net.use_bias) net.biases[l] -= cfg.eta * g.b[l];
        }

        TrainRecord rec;
        rec.iteration = iter;
        rec.train_mse = batch_mse(net, train, cfg.workers);
        rec.test_mse = batch_mse(net, test, cfg.workers);
        rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.records.push_back(rec);

        if (!std::isfinite(rec.train_mse) || !std::isfinite(rec.test_mse))
            throw training_diverged_error("steepest descent diverged (non-finite MSE)", log);

        if (cfg.early_stop_patience > 0) {
            if (rec.test_mse < best_test) {
                best_test = rec.test_mse;
                since_best = 0;
            } else if (++since_best >= cfg.early_stop_patience) {
                log.early_stopped = true;
                break;
            }
        }
    }
    return {std::move(net), std::move(log)};
}

namespace detail {

// Canonical parameter packing: per layer, weights row-major, then the bias.
inline void pack_params(const Network& net, Eigen::VectorXd& theta) {
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto& w = net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) theta(k++) = w(r, c);
        if (net.use_bias)
            for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) theta(k++) = net.biases[l](i);
    }
}

inline void unpack_params(Network& net, const Eigen::VectorXd& theta) {
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto& w = net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = theta(k++);
        if (net.use_bias)
            for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) net.biases[l](i) = theta(k++);
    }
}

// d y / d theta for one sample, written into a contiguous column (packing
// order as above).
inline void jacobian_row(const Network& net, NetWorkspace& ws, const double* x, double* out,
                         double* y_out) {
    *y_out = forward_into(net, ws, x);
    backward_deltas(net, ws, 1.0);
    const int nl = net.layout.weight_layers();
    std::size_t k = 0;
    for (int l = 0; l < nl; ++l) {
        const auto& delta = ws.delta[static_cast<std::size_t>(l)];
        const auto& a = ws.act[static_cast<std::size_t>(l)];
        for (Eigen::Index r = 0; r < delta.size(); ++r)
            for (Eigen::Index c = 0; c < a.size(); ++c) out[k++] = delta(r) * a(c);
        if (net.use_bias)
            for (Eigen::Index r = 0; r < delta.size(); ++r) out[k++] = delta(r);
    }
}

} // namespace detail

// Levenberg-Marquardt over all weights: per iteration solve
// (J^T J + lambda * diag(J^T J)) delta = J^T e, accept the step only if the
// train MSE drops. The Jacobian is processed in fixed-size sample blocks and
// accumulated into J^T J directly, which keeps memory bounded and makes the
// result independent of the worker count.
inline std::pair<Network, TrainLog> train_lm(Network net, const Dataset& train, const Dataset& test,
                                             const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.algorithm != TrainAlgorithm::levenberg_marquardt)
        throw config_error("train_lm called with a different algorithm configured");
    net.validate();
    detail::check_batch(net, train);
    detail::check_batch(net, test);

    const std::size_t n = train.columns();
    const Eigen::Index p = static_cast<Eigen::Index>(net.parameter_count());
    constexpr std::size_t kSampleBlock = 256;  // fixed block grid; see note above
    constexpr Eigen::Index kColSlab = 256;

    Eigen::MatrixXd jtj(p, p);          // lower triangle is maintained
    Eigen::MatrixXd damped(p, p);
    Eigen::MatrixXd jbt(p, static_cast<Eigen::Index>(kSampleBlock));
    Eigen::VectorXd jte(p), eb(static_cast<Eigen::Index>(kSampleBlock));
    Eigen::VectorXd theta(p), cand_theta(p);

    TrainLog log;
    const auto t0 = std::chrono::steady_clock::now();
    double lambda = cfg.lm_lambda0;
    double best_test = std::numeric_limits<double>::infinity();
    int since_best = 0;
    double train_mse = batch_mse(net, train, cfg.workers);

    Network cand = net;

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        jtj.setZero();
        jte.setZero();

        for (std::size_t block = 0; block < n; block += kSampleBlock) {
            const std::size_t bsz = std::min(kSampleBlock, n - block);
            parallel_for(bsz, cfg.workers, [&](std::size_t i0, std::size_t i1) {
                detail::NetWorkspace ws(net);
                for (std::size_t i = i0; i < i1; ++i) {
                    const std::size_t s = block + i;
                    double y = 0.0;
                    detail::jacobian_row(net, ws,
                                         train.inputs.col(static_cast<Eigen::Index>(s)).data(),
                                         jbt.col(static_cast<Eigen::Index>(i)).data(), &y);
                    eb(static_cast<Eigen::Index>(i)) = train.targets(static_cast<Eigen::Index>(s)) - y;
                }
            });

            // Lower-triangle accumulation in column slabs; each output element
            // belongs to exactly one slab and blocks arrive in a fixed order.
            const std::size_t n_slabs = static_cast<std::size_t>((p + kColSlab - 1) / kColSlab);
            parallel_for_blocks(n_slabs, cfg.workers, 1, [&](std::size_t s0, std::size_t s1) {
                for (std::size_t si = s0; si < s1; ++si) {
                    const Eigen::Index c0 = static_cast<Eigen::Index>(si) * kColSlab;
                    const Eigen::Index w = std::min(kColSlab, p - c0);
                    jtj.block(c0, c0, p - c0, w).noalias() +=
                        jbt.middleRows(c0, p - c0).leftCols(static_cast<Eigen::Index>(bsz)) *
                        jbt.middleRows(c0, w).leftCols(static_cast<Eigen::Index>(bsz)).transpose();
                }
            });
            jte.noalias() += jbt.leftCols(static_cast<Eigen::Index>(bsz)) * eb.head(static_cast<Eigen::Index>(bsz));
        }

        if (jte.lpNorm<Eigen::Infinity>() == 0.0) {
            // Residuals (or their projection) vanish: nothing to update.
            TrainRecord rec{iter, train_mse, batch_mse(net, test, cfg.workers), lambda,
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
            log.records.push_back(rec);
            break;
        }

        detail::pack_params(net, theta);
        bool accepted = false;
        // Floor the damping term: a saturated unit can zero a Jacobian column
        // exactly, and lambda * 0 regularizes nothing at any lambda.
        const double diag_floor = 1e-12 * (1.0 + jtj.diagonal().maxCoeff());
        while (true) {
            damped.triangularView<Eigen::Lower>() = jtj.triangularView<Eigen::Lower>();
            damped.diagonal() = jtj.diagonal() + lambda * jtj.diagonal().cwiseMax(diag_floor);

            Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(damped);  // in-place
            bool solve_ok = llt.info() == Eigen::Success;
            Eigen::VectorXd delta;
            if (solve_ok) {
                delta = llt.solve(jte);
                solve_ok = delta.allFinite();
            }

            if (solve_ok) {
                cand_theta = theta + delta;
                detail::unpack_params(cand, cand_theta);
                const double cand_mse = batch_mse(cand, train, cfg.workers);
                if (std::isfinite(cand_mse) && cand_mse < train_mse) {
                    std::swap(net, cand);  // cand is fully overwritten before its next use
                    train_mse = cand_mse;
                    lambda = std::max(lambda / cfg.lm_lambda_down, 1e-15);
                    accepted = true;
                    break;
                }
            }

            lambda *= cfg.lm_lambda_up;
            if (lambda > cfg.lm_lambda_max) {
                if (!solve_ok)
                    throw training_diverged_error(
                        "LM normal-equation solve kept failing up to the damping cap", log);
                break;  // solvable but no acceptable step: stalled at a stationary point
            }
        }

        TrainRecord rec;
        rec.iteration = iter;
        rec.train_mse = train_mse;
        rec.test_mse = batch_mse(net, test, cfg.workers);
        rec.lambda = lambda;
        rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.records.push_back(rec);

        if (!accepted) {
            log.stalled = true;
            break;
        }
        if (!std::isfinite(train_mse))
            throw training_diverged_error("LM training diverged (non-finite MSE)", log);

        if (cfg.early_stop_patience > 0) {
            if (rec.test_mse < best_test) {
                best_test = rec.test_mse;
                since_best = 0;
            } else if (++since_best >= cfg.early_stop_patience) {
                log.early_stopped = true;
                break;
            }
        }
    }
    return {std::move(net), std::move(log)};
}

} // namespace bfs
