#include <catch2/catch_amalgamated.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bfs/bfs.hpp"
#include "cli_app.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Redirects fd 1 to a file so printf output from command handlers can be read
// back by the test.
class StdoutCapture {
public:
    explicit StdoutCapture(const std::string& path) : path_(path) {
        std::fflush(stdout);
        saved_ = dup(1);
        const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        dup2(fd, 1);
        ::close(fd);
    }
    std::string finish() {
        std::fflush(stdout);
        dup2(saved_, 1);
        ::close(saved_);
        std::ifstream in(path_);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }

private:
    int saved_;
    std::string path_;
};

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("bfskit_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

std::vector<std::string> tiny_gen_args(const std::string& out) {
    return {"gen-data", "--scan-range", "12", "--step", "1", "--linewidths", "4,6",
            "--offsets", "3,6,9", "--snrs", "20", "--realizations", "2", "--seed", "5",
            "--out", out};
}

} // namespace

TEST_CASE("cli exit codes") {
    TempDir tmp;
    SECTION("missing required flag is a usage error") {
        CHECK(bfscli::run_cli({"gen-data"}) == 2);
    }
    SECTION("unknown subcommand is a usage error") {
        CHECK(bfscli::run_cli({"frobnicate"}) == 2);
    }
    SECTION("unknown flag is a usage error") {
        CHECK(bfscli::run_cli({"gen-data", "--out", tmp / "x.bgsd", "--bogus"}) == 2);
    }
    SECTION("missing input file is a data error") {
        CHECK(bfscli::run_cli({"infer", "--model", tmp / "none.fnn", "--in", tmp / "none.csv"}) == 3);
    }
    SECTION("degenerate numerical input is a numerical error") {
        const std::string csv = tmp / "flat.csv";
        bfs::Spectrum s{{0.0, 1.0, 157}, std::vector<double>(157, 0.5)};
        bfs::save_spectrum_csv(s, csv);
        CHECK(bfscli::run_cli({"fit", "--in", csv, "--report", tmp / "r.csv"}) == 4);
    }
    SECTION("help exits cleanly") {
        StdoutCapture cap(tmp / "help.txt");
        const int rc = bfscli::run_cli({"--help"});
        const std::string text = cap.finish();
        CHECK(rc == 0);
        CHECK(text.find("gen-data") != std::string::npos);
    }
}

TEST_CASE("gen-data writes a loadable dataset and a faithful manifest") {
    TempDir tmp;
    const std::string out = tmp / "tiny.bgsd";
    {
        StdoutCapture cap(tmp / "log.txt");
        REQUIRE(bfscli::run_cli(tiny_gen_args(out)) == 0);
        cap.finish();
    }

    const bfs::Dataset d = bfs::load_dataset(out);
    CHECK(d.columns() == 2 * 3 * 1 * 2);
    CHECK(d.inputs.rows() == 13);

    const json m = load_json(out + ".manifest.json");
    CHECK(m["tool"] == "bfskit");
    CHECK(m["command"] == "gen-data");
    CHECK(m["outputs"].contains(out));
    CHECK(m["outputs"][out] == bfs::hash_to_hex(bfs::hash_file(out)));
}

TEST_CASE("identical runs differ only in the manifest timestamp") {
    TempDir tmp;
    const std::string out = tmp / "t.bgsd";
    {
        StdoutCapture cap(tmp / "log.txt");
        REQUIRE(bfscli::run_cli(tiny_gen_args(out)) == 0);
        json m1 = load_json(out + ".manifest.json");
        REQUIRE(bfscli::run_cli(tiny_gen_args(out)) == 0);
        json m2 = load_json(out + ".manifest.json");
        cap.finish();
        m1.erase("timestamp_utc");
        m2.erase("timestamp_utc");
        CHECK(m1 == m2);
    }
}

TEST_CASE("a manifest replays to identical output hashes") {
    TempDir tmp;
    const std::string out = tmp / "orig.bgsd";
    {
        StdoutCapture cap(tmp / "log.txt");
        REQUIRE(bfscli::run_cli(tiny_gen_args(out)) == 0);
        cap.finish();
    }
    const json m = load_json(out + ".manifest.json");

    // Rebuild the argv from the manifest, steering the output elsewhere.
    std::vector<std::string> args = m["resolved_args"].get<std::vector<std::string>>();
    const std::string replay_out = tmp / "replay.bgsd";
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--out") args[i + 1] = replay_out;
    {
        StdoutCapture cap(tmp / "log2.txt");
        REQUIRE(bfscli::run_cli(args) == 0);
        cap.finish();
    }
    CHECK(bfs::hash_file(replay_out) == bfs::hash_file(out));
}

TEST_CASE("train, eval and infer round trip through the cli") {
    TempDir tmp;
    const std::string train_file = tmp / "train.bgsd";
    const std::string test_file = tmp / "test.bgsd";
    const std::string model_file = tmp / "model.fnn";
    const std::string log_file = tmp / "log.csv";

    StdoutCapture cap(tmp / "out.txt");
    auto train_args = tiny_gen_args(train_file);
    REQUIRE(bfscli::run_cli(train_args) == 0);
    auto test_args = tiny_gen_args(test_file);
    test_args.push_back("--test-set");
    REQUIRE(bfscli::run_cli(test_args) == 0);

    REQUIRE(bfscli::run_cli({"train", "--data", train_file, "--test", test_file, "--algo", "lm",
                             "--layout", "13,4,1", "--iters", "8", "--seed", "3", "--out",
                             model_file, "--log", log_file}) == 0);
    REQUIRE(bfscli::run_cli({"eval", "--model", model_file, "--data", test_file}) == 0);
    cap.finish();

    // The training log has a header plus one row per iteration.
    std::ifstream log_in(log_file);
    std::string line;
    int rows = 0;
    while (std::getline(log_in, line))
        if (!line.empty()) ++rows;
    CHECK(rows >= 2);

    const bfs::Network net = bfs::load_model(model_file);
    CHECK(net.scan_range_mhz == 12.0);

    // infer on a model-compatible spectrum
    const std::string spec_csv = tmp / "spec.csv";
    bfs::save_spectrum_csv(bfs::synth_spectrum({1.0, 6.0, 5.0}, {0.0, 1.0, 13}), spec_csv);
    StdoutCapture cap2(tmp / "infer.txt");
    REQUIRE(bfscli::run_cli({"infer", "--model", model_file, "--in", spec_csv}) == 0);
    const std::string printed = cap2.finish();
    CHECK(std::stod(printed) > 0.0);
    CHECK(std::stod(printed) < 12.0);
}

TEST_CASE("fit and resample commands") {
    TempDir tmp;
    const std::string spec_csv = tmp / "s.csv";
    bfs::save_spectrum_csv(bfs::synth_spectrum({1.0, 78.0, 30.0}, {0.0, 4.0, 40}), spec_csv);

    SECTION("fit reports the recovered parameters") {
        StdoutCapture cap(tmp / "fit.txt");
        REQUIRE(bfscli::run_cli({"fit", "--in", spec_csv, "--report", tmp / "fit.csv"}) == 0);
        cap.finish();
        std::ifstream in(tmp / "fit.csv");
        std::string header, row;
        REQUIRE(std::getline(in, header));
        REQUIRE(std::getline(in, row));
        double gain = 0, bfs_mhz = 0;
        REQUIRE(std::sscanf(row.c_str(), "%lf,%lf", &gain, &bfs_mhz) == 2);
        CHECK(bfs_mhz == Catch::Approx(78.0).margin(1e-4));
    }
    SECTION("resample emits the 1 MHz grid") {
        StdoutCapture cap(tmp / "rs.txt");
        REQUIRE(bfscli::run_cli({"resample", "--in", spec_csv, "--step", "4", "--out",
                                 tmp / "rs.csv"}) == 0);
        cap.finish();
        const bfs::Spectrum out = bfs::load_spectrum_csv(tmp / "rs.csv");
        CHECK(out.grid.step_mhz == 1.0);
        CHECK(out.grid.count == 157);
    }
    SECTION("a step mismatch is a data error") {
        CHECK(bfscli::run_cli({"resample", "--in", spec_csv, "--step", "2", "--out",
                               tmp / "bad.csv"}) == 3);
    }
}

TEST_CASE("simulate-trace and analyze commands") {
    TempDir tmp;
    const std::string profile = tmp / "fiber.toml";
    {
        std::ofstream out(profile);
        out << "length_km = 0.6\n"
            << "spatial_step_m = 10\n"
            << "base_bfs_mhz = 78\n"
            << "linewidth_mhz = 30\n"
            << "snr_db = 30\n"
            << "heated_segments = [[0.5, 0.55, 10.0, 1.3]]\n";
    }
    const std::string before = tmp / "before.bin";
    const std::string after = tmp / "after.bin";
    const std::string model_file = tmp / "model.fnn";
    {
        // constant-output model: enough to drive the full analyze pipeline
        bfs::Network net = bfs::init_network({{157, 4, 1}}, 1);
        for (auto& w : net.weights) w.setZero();
        net.biases[1](0) = 0.5;
        net.scan_range_mhz = 156.0;
        bfs::save_model(net, model_file);
    }

    StdoutCapture cap(tmp / "out.txt");
    REQUIRE(bfscli::run_cli({"simulate-trace", "--profile", profile, "--step", "1", "--seed", "4",
                             "--out", before}) == 0);
    REQUIRE(bfscli::run_cli({"simulate-trace", "--profile", profile, "--step", "1", "--seed", "4",
                             "--heated", "--out", after}) == 0);
    REQUIRE(bfscli::run_cli({"analyze", "--trace-before", before, "--trace-after", after,
                             "--model", model_file, "--profile", profile, "--region", "0.05:0.45",
                             "--report", tmp / "report"}) == 0);
    cap.finish();

    CHECK(fs::exists(fs::path(tmp / "report") / "bfs_profiles.csv"));
    CHECK(fs::exists(fs::path(tmp / "report") / "freq_difference.csv"));
    CHECK(fs::exists(fs::path(tmp / "report") / "perkm_diff_deviation.csv"));
    CHECK(fs::exists(fs::path(tmp / "report") / "summary.csv"));

    std::ifstream sum(fs::path(tmp / "report") / "summary.csv");
    std::string header, row;
    REQUIRE(std::getline(sum, header));
    REQUIRE(std::getline(sum, row));
    double unc_lcf = -1, unc_fnn = -1, dt_lcf = 0, dt_fnn = 0;
    REQUIRE(std::sscanf(row.c_str(), "%lf,%lf,%lf,%lf", &unc_lcf, &unc_fnn, &dt_lcf, &dt_fnn) == 4);
    CHECK(unc_lcf >= 0.0);
    CHECK(dt_lcf == Catch::Approx(10.0).margin(0.5));  // LCF recovers the applied 10 C
}

TEST_CASE("config file provides defaults, flags win") {
    TempDir tmp;
    const std::string cfg = tmp / "run.cfg";
    {
        std::ofstream out(cfg);
        out << "workers=2\n";
    }
    StdoutCapture cap(tmp / "out.txt");
    auto args = tiny_gen_args(tmp / "cfg.bgsd");
    args.insert(args.begin(), {"--config", cfg});
    CHECK(bfscli::run_cli(args) == 0);
    cap.finish();
    CHECK(fs::exists(tmp / "cfg.bgsd"));
}
