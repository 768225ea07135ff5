#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfs/errors.hpp"
#include "bfs/io.hpp"
#include "bfs/rng.hpp"
#include "bfs/spectrum.hpp"

namespace bfs {

// Layer widths [M, I1, I2, ..., J]. Hidden layers are sigmoid, the output
// layer is a plain weighted sum.
struct NetworkLayout {
    std::vector<int> sizes;

    int input_size() const { return sizes.front(); }
    int output_size() const { return sizes.back(); }
    int weight_layers() const { return static_cast<int>(sizes.size()) - 1; }

    void validate() const {
        if (sizes.size() < 2) throw domain_error("network needs at least an input and an output layer");
        for (int w : sizes)
            if (w < 1) throw domain_error("layer widths must be >= 1");
    }
};

struct Network {
    NetworkLayout layout;
    std::vector<Eigen::MatrixXd> weights;  // weights[l]: sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> biases;   // biases[l]: sizes[l+1]; all-zero when use_bias is false
    bool use_bias = true;
    double scan_range_mhz = 156.0;   // scale that turns the normalized output back into MHz
    double train_step_mhz = 1.0;     // grid step the input contract expects
    std::uint64_t provenance_hash = 0;

    int input_size() const { return layout.input_size(); }

    void validate() const {
        layout.validate();
        const std::size_t nl = static_cast<std::size_t>(layout.weight_layers());
        if (weights.size() != nl || biases.size() != nl)
            throw dimension_error("network layer count does not match its layout");
        for (std::size_t l = 0; l < nl; ++l) {
            if (weights[l].rows() != layout.sizes[l + 1] || weights[l].cols() != layout.sizes[l])
                throw dimension_error("weight matrix shape does not match the layout");
            if (biases[l].size() != layout.sizes[l + 1])
                throw dimension_error("bias vector shape does not match the layout");
            if (!weights[l].allFinite() || !biases[l].allFinite())
                throw domain_error("network contains non-finite parameters");
        }
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            n += static_cast<std::size_t>(weights[l].size());
            if (use_bias) n += static_cast<std::size_t>(biases[l].size());
        }
        return n;
    }
};

inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

// Uniform fan-based initialization in +/- sqrt(6/(fan_in+fan_out)); biases
// start at zero. Draw order is layer by layer, row-major, so a seed pins the
// network exactly.
inline Network init_network(const NetworkLayout& layout, std::uint64_t seed, bool use_bias = true) {
    layout.validate();
    Network net;
    net.layout = layout;
    net.use_bias = use_bias;
    std::mt19937_64 eng(seed);
    for (int l = 0; l + 1 < static_cast<int>(layout.sizes.size()); ++l) {
        const int fan_in = layout.sizes[static_cast<std::size_t>(l)];
        const int fan_out = layout.sizes[static_cast<std::size_t>(l) + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) w(r, c) = (2.0 * uniform01(eng) - 1.0) * bound;
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

// Forward pass returning the full output vector. Hidden layers apply the
// sigmoid; the final layer stays linear.
inline Eigen::VectorXd forward_vec(const Network& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_size())
        throw dimension_error("input length does not match the network's input layer");
    const int nl = net.layout.weight_layers();
    Eigen::VectorXd a = x;
    for (int l = 0; l < nl; ++l) {
        Eigen::VectorXd u = net.weights[static_cast<std::size_t>(l)] * a;
        if (net.use_bias) u += net.biases[static_cast<std::size_t>(l)];
        if (l + 1 < nl) {
            for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = sigmoid(u(i));
        }
        a = std::move(u);
    }
    return a;
}

inline double forward(const Network& net, const Eigen::VectorXd& x) {
    if (net.layout.output_size() != 1)
        throw dimension_error("scalar forward pass requires a single output unit");
    return forward_vec(net, x)(0);
}

// BFS retrieval: min-max normalize, run the network, scale the normalized
// output by the trained window span, and offset by the window start.
inline double predict_bfs(const Network& net, const Spectrum& s) {
    s.validate();
    if (s.grid.count != net.input_size() ||
        std::abs(s.grid.step_mhz - net.train_step_mhz) > 1e-9)
        throw grid_contract_error(
            "spectrum grid does not match the model input contract (" +
            std::to_string(net.input_size()) + " points at " +
            std::to_string(net.train_step_mhz) + " MHz); resample first");
    const Spectrum n = normalize_spectrum(s);
    Eigen::VectorXd x(n.grid.count);
    for (int i = 0; i < n.grid.count; ++i) x(i) = n.gains[static_cast<std::size_t>(i)];
    return s.grid.start_mhz + forward(net, x) * net.scan_range_mhz;
}

// --- model container ----------------------------------------------------------
// "BFSFNN01", layer count + widths, activation ids, bias flag, normalization
// meta, provenance hash, then per layer row-major f64 weights and f64 biases.

inline constexpr char kModelMagic[9] = "BFSFNN01";
inline constexpr std::uint8_t kActSigmoid = 0;
inline constexpr std::uint8_t kActLinear = 1;

inline void save_model(const Network& net, const std::string& path) {
    net.validate();
    auto out = open_output(path);
    write_magic(out, kModelMagic);
    le_write<std::uint32_t>(out, static_cast<std::uint32_t>(net.layout.sizes.size()));
    for (int w : net.layout.sizes) le_write<std::uint32_t>(out, static_cast<std::uint32_t>(w));
    le_write<std::uint8_t>(out, kActSigmoid);
    le_write<std::uint8_t>(out, kActLinear);
    le_write<std::uint8_t>(out, net.use_bias ? 1 : 0);
    le_write<double>(out, net.scan_range_mhz);
    le_write<double>(out, net.train_step_mhz);
    le_write<std::uint64_t>(out, net.provenance_hash);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto& w = net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) le_write<double>(out, w(r, c));
        le_write_f64s(out, net.biases[l].data(), static_cast<std::size_t>(net.biases[l].size()));
    }
    if (!out) throw data_error("failed writing model: " + path);
}

inline Network load_model(const std::string& path) {
    auto in = open_input(path);
    check_magic(in, kModelMagic, "FNN model");
    const auto n_sizes = le_read<std::uint32_t>(in, "layer count");
    if (n_sizes < 2 || n_sizes > 64) throw dimension_error("implausible layer count in model file");

    Network net;
    net.layout.sizes.resize(n_sizes);
    for (auto& w : net.layout.sizes) {
        w = static_cast<int>(le_read<std::uint32_t>(in, "layer width"));
        if (w < 1) throw dimension_error("model file declares an empty layer");
    }
    const auto hidden_act = le_read<std::uint8_t>(in, "hidden activation");
    const auto out_act = le_read<std::uint8_t>(in, "output activation");
    if (hidden_act != kActSigmoid || out_act != kActLinear)
        throw data_error("unsupported activation identifiers in model file");
    net.use_bias = le_read<std::uint8_t>(in, "bias flag") != 0;
    net.scan_range_mhz = le_read<double>(in, "scan range");
    net.train_step_mhz = le_read<double>(in, "train step");
    net.provenance_hash = le_read<std::uint64_t>(in, "provenance hash");

    for (std::size_t l = 0; l + 1 < n_sizes; ++l) {
        const int rows = net.layout.sizes[l + 1];
        const int cols = net.layout.sizes[l];
        Eigen::MatrixXd w(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) w(r, c) = le_read<double>(in, "weight");
        net.weights.push_back(std::move(w));
        Eigen::VectorXd b(rows);
        le_read_f64s(in, b.data(), static_cast<std::size_t>(rows), "bias");
        net.biases.push_back(std::move(b));
    }
    net.validate();
    return net;
}

} // namespace bfs
