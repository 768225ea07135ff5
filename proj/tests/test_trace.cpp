#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "bfs/trace.hpp"

using namespace bfs;

namespace {

FiberProfile short_fiber() {
    FiberProfile p;
    p.length_km = 2.0;
    p.spatial_step_m = 50.0;
    p.base_bfs_mhz = 78.0;
    p.linewidth_mhz = 30.0;
    p.snr_db = 300.0;  // effectively noiseless
    p.heated_segments.push_back({1.5, 1.8, 15.7, 1.3});
    return p;
}

// Output-layer bias only: predicts the window center regardless of input.
Network constant_half_net() {
    Network net = init_network({{157, 4, 1}}, 1);
    for (auto& w : net.weights) w.setZero();
    net.biases[1](0) = 0.5;
    net.scan_range_mhz = 156.0;
    return net;
}

} // namespace

TEST_CASE("fiber profile") {
    const FiberProfile p = short_fiber();
    SECTION("heated zone shifts by delta T times the coefficient") {
        CHECK(p.bfs_at(1.6, true) == Catch::Approx(78.0 + 15.7 * 1.3).epsilon(1e-12));
        CHECK(p.bfs_at(1.6, false) == 78.0);
        CHECK(p.bfs_at(0.5, true) == 78.0);
    }
    SECTION("segments outside the fiber are rejected") {
        FiberProfile bad = p;
        bad.heated_segments.push_back({1.9, 2.4, 5.0, 1.3});
        CHECK_THROWS_AS(bad.validate(), domain_error);
    }
    SECTION("segmented SNR lookup") {
        FiberProfile seg = p;
        seg.snr_segments = {{0.0, 1.0, 27.0}, {1.0, 2.0, 18.0}};
        CHECK(seg.snr_at(0.4) == 27.0);
        CHECK(seg.snr_at(1.7) == 18.0);
    }
}

TEST_CASE("profile file parsing") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "bfs_test_profile.toml";
    {
        std::ofstream out(path);
        out << "# simulated sensing fiber\n";
        out << "length_km = 2.0\n";
        out << "spatial_step_m = 50\n";
        out << "base_bfs_mhz = 78\n";
        out << "linewidth_mhz = 30\n";
        out << "snr_db = 23.5\n";
        out << "snr_segments = [[0, 1, 27], [1, 2, 18]]\n";
        out << "heated_segments = [[1.5, 1.8, 15.7, 1.3]]\n";
    }
    const FiberProfile p = load_fiber_profile(path.string());
    CHECK(p.length_km == 2.0);
    CHECK(p.snr_segments.size() == 2);
    CHECK(p.snr_at(1.5) == 18.0);
    REQUIRE(p.heated_segments.size() == 1);
    CHECK(p.heated_segments[0].delta_temp_c == 15.7);
    fs::remove(path);
}

TEST_CASE("trace simulation") {
    const FiberProfile p = short_fiber();
    const ScanConfig scan{1, 156.0};

    SECTION("deterministic per seed") {
        const TraceMeasurement a = simulate_trace(p, scan, false, 9);
        const TraceMeasurement b = simulate_trace(p, scan, false, 9);
        CHECK(a.gains == b.gains);
        const TraceMeasurement c = simulate_trace(p, scan, false, 10);
        CHECK(a.gains != c.gains);
    }
    SECTION("worker-independent") {
        const TraceMeasurement a = simulate_trace(p, scan, false, 9, 1);
        const TraceMeasurement b = simulate_trace(p, scan, false, 9, 4);
        CHECK(a.gains == b.gains);
    }
    SECTION("empty heated list makes the flag a no-op") {
        FiberProfile unheated = p;
        unheated.heated_segments.clear();
        const TraceMeasurement a = simulate_trace(unheated, scan, true, 5);
        const TraceMeasurement b = simulate_trace(unheated, scan, false, 5);
        CHECK(a.gains == b.gains);
    }
    SECTION("positions cover the fiber") {
        const TraceMeasurement t = simulate_trace(p, scan, false, 1);
        CHECK(t.positions_km.size() == 41);
        CHECK(t.positions_km.front() == 0.0);
        CHECK(t.positions_km.back() == Catch::Approx(2.0));
    }
}

TEST_CASE("profile retrieval") {
    const FiberProfile p = short_fiber();
    const ScanConfig scan{1, 156.0};
    const TraceMeasurement cold = simulate_trace(p, scan, false, 33);
    const TraceMeasurement hot = simulate_trace(p, scan, true, 34);

    SECTION("LCF recovers the base BFS on a noiseless trace") {
        const BfsProfile prof = retrieve_bfs_profile_lcf(cold, {}, 2);
        CHECK(prof.gap_count == 0);
        for (double v : prof.bfs_mhz) CHECK(v == Catch::Approx(78.0).margin(1e-3));
    }
    SECTION("position order is preserved regardless of workers") {
        const BfsProfile p1 = retrieve_bfs_profile_lcf(cold, {}, 1);
        const BfsProfile p4 = retrieve_bfs_profile_lcf(cold, {}, 4);
        CHECK(p1.bfs_mhz == p4.bfs_mhz);
        CHECK(p1.positions_km == cold.positions_km);
    }
    SECTION("FNN plumbing with a constant network") {
        const BfsProfile prof = retrieve_bfs_profile_fnn(cold, constant_half_net(), 2);
        CHECK(prof.gap_count == 0);
        // whole-spectrum window starts at 0, so the constant net predicts 78
        for (double v : prof.bfs_mhz) CHECK(v == Catch::Approx(78.0).margin(1e-9));
    }
    SECTION("frequency difference isolates the heated zone") {
        const BfsProfile before = retrieve_bfs_profile_lcf(cold, {}, 2);
        const BfsProfile after = retrieve_bfs_profile_lcf(hot, {}, 2);
        const std::vector<double> diff = frequency_difference(before, after);
        for (std::size_t i = 0; i < diff.size(); ++i) {
            const double z = cold.positions_km[i];
            if (z >= 1.5 && z <= 1.8)
                CHECK(diff[i] == Catch::Approx(15.7 * 1.3).margin(1e-3));
            else
                CHECK(diff[i] == Catch::Approx(0.0).margin(1e-3));
        }
    }
    SECTION("length mismatch is rejected") {
        BfsProfile a, b;
        a.bfs_mhz = {1.0, 2.0};
        b.bfs_mhz = {1.0};
        CHECK_THROWS_AS(frequency_difference(a, b), dimension_error);
    }
}

TEST_CASE("measurement uncertainty") {
    std::vector<double> positions, diff;
    for (int i = 0; i < 200; ++i) positions.push_back(0.01 * i);  // 0..1.99 km
    const std::vector<HeatedSegment> heated{{1.5, 1.8, 15.7, 1.3}};

    SECTION("zero difference means zero uncertainty") {
        diff.assign(200, 0.0);
        CHECK(measurement_uncertainty(positions, diff, {0.0, 1.0}, heated, 1.3) == 0.0);
    }
    SECTION("Gaussian difference reproduces sigma / c_t") {
        GaussianStream g(123);
        diff.clear();
        for (int i = 0; i < 200; ++i) diff.push_back(0.286 * g.next());
        const double u = measurement_uncertainty(positions, diff, {0.0, 1.4}, heated, 1.3);
        CHECK(u == Catch::Approx(0.286 / 1.3).epsilon(0.15));
    }
    SECTION("region overlapping a heated zone is rejected") {
        diff.assign(200, 0.0);
        CHECK_THROWS_AS(measurement_uncertainty(positions, diff, {1.0, 1.6}, heated, 1.3),
                        domain_error);
    }
    SECTION("region with too few positions is rejected") {
        diff.assign(200, 0.0);
        CHECK_THROWS_AS(measurement_uncertainty(positions, diff, {0.0, 0.1}, heated, 1.3),
                        domain_error);
    }
}

TEST_CASE("per-km mean deviation") {
    SECTION("identical profiles give all-zero bins") {
        std::vector<double> positions, a;
        for (int i = 0; i < 100; ++i) {
            positions.push_back(0.05 * i);
            a.push_back(78.0);
        }
        const auto bins = per_km_mean_deviation(a, a, positions);
        REQUIRE(bins.size() == 5);  // 0..4.95 km
        for (const auto& bin : bins) CHECK(bin.mean_abs_dev_mhz == 0.0);
    }
    SECTION("constant offset appears in every bin") {
        std::vector<double> positions, a, b;
        for (int i = 0; i < 100; ++i) {
            positions.push_back(0.05 * i);
            a.push_back(78.0);
            b.push_back(78.1);
        }
        for (const auto& bin : per_km_mean_deviation(a, b, positions))
            CHECK(bin.mean_abs_dev_mhz == Catch::Approx(0.1).epsilon(1e-12));
    }
    SECTION("a 23.95 km fiber bins into 24 slots") {
        std::vector<double> positions, a;
        for (double z = 0.0; z <= 23.95 + 1e-9; z += 0.05) {
            positions.push_back(z);
            a.push_back(1.0);
        }
        CHECK(per_km_mean_deviation(a, a, positions).size() == 24);
    }
    SECTION("empty bins are absent, not zero") {
        // positions skip the 1..2 km stretch entirely
        std::vector<double> positions{0.2, 0.7, 2.3, 2.9};
        std::vector<double> a{1, 1, 1, 1};
        const auto bins = per_km_mean_deviation(a, a, positions);
        REQUIRE(bins.size() == 2);
        CHECK(bins[0].bin_start_km == 0.0);
        CHECK(bins[1].bin_start_km == 2.0);
    }
    SECTION("NaN gaps are skipped") {
        std::vector<double> positions{0.1, 0.2, 0.3};
        std::vector<double> a{1.0, std::nan(""), 1.0};
        std::vector<double> b{1.2, 5.0, 1.2};
        const auto bins = per_km_mean_deviation(a, b, positions);
        REQUIRE(bins.size() == 1);
        CHECK(bins[0].count == 2);
        CHECK(bins[0].mean_abs_dev_mhz == Catch::Approx(0.2).epsilon(1e-12));
    }
}

TEST_CASE("trace container round trip") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "bfs_test_trace.bin";
    const TraceMeasurement t = simulate_trace(short_fiber(), {2, 156.0}, true, 77);
    save_trace(t, path.string());

    SECTION("bit-identical matrices") {
        const TraceMeasurement back = load_trace(path.string());
        CHECK(back.gains == t.gains);
        CHECK(back.positions_km == t.positions_km);
        CHECK(back.scan.step_mhz == 2);
        CHECK(back.seed == 77);
    }
    SECTION("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("WRONGMAG", 8);
        f.close();
        CHECK_THROWS_AS(load_trace(path.string()), bad_magic_error);
    }
    SECTION("truncated") {
        fs::resize_file(path, fs::file_size(path) / 2);
        CHECK_THROWS_AS(load_trace(path.string()), truncated_file_error);
    }
    fs::remove(path);
}
