#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "bfs/dataset.hpp"
#include "bfs/lcf.hpp"

using namespace bfs;

namespace {

GridSpec small_spec() {
    GridSpec g;
    g.linewidths_mhz = {20.0, 35.0};
    g.bfs_fractions = {0.2, 0.5, 0.8};
    g.snrs_db = {16.0, 26.0};
    g.realizations_per_snr = 2;
    g.base_seed = 77;
    return g;
}

std::uint64_t column_hash(const Dataset& d, Eigen::Index c) {
    Fnv1a h;
    h.update_f64s(d.inputs.col(c).data(), static_cast<std::size_t>(d.inputs.rows()));
    return h.digest();
}

} // namespace

TEST_CASE("grid cardinality") {
    SECTION("the full-scale grid reproduces the 385,560 total") {
        const GridSpec g = GridSpec::paper_defaults();
        CHECK(g.linewidths_mhz.size() == 51);
        CHECK(g.bfs_fractions.size() == 126);
        CHECK(g.snrs_db.size() == 3);
        CHECK(g.realizations_per_snr == 20);
        CHECK(g.total_columns() == 385560);
        CHECK(g.grid_count() == 157);
    }
    SECTION("singleton grid yields one column") {
        GridSpec g;
        g.linewidths_mhz = {30.0};
        g.bfs_fractions = {0.5};
        g.snrs_db = {16.0};
        g.realizations_per_snr = 1;
        const Dataset d = generate_training_set(g);
        CHECK(d.columns() == 1);
    }
    SECTION("column count equals the product of grid dimensions") {
        const Dataset d = generate_training_set(small_spec());
        CHECK(d.columns() == 2 * 3 * 2 * 2);
        CHECK(d.inputs.rows() == 157);
        CHECK(d.targets.size() == static_cast<Eigen::Index>(d.columns()));
    }
}

TEST_CASE("generated columns are normalized with consistent targets") {
    const GridSpec spec = small_spec();
    const Dataset d = generate_training_set(spec);
    for (Eigen::Index c = 0; c < d.inputs.cols(); ++c) {
        CHECK(d.inputs.col(c).minCoeff() == 0.0);
        CHECK(d.inputs.col(c).maxCoeff() == 1.0);
        CHECK(d.targets(c) >= 0.0);
        CHECK(d.targets(c) <= 1.0);
    }

    // The pre-noise ideal spectrum of every column must hand its target back
    // through the curve-fit route.
    for (std::size_t li = 0; li < spec.linewidths_mhz.size(); ++li) {
        for (std::size_t fi = 0; fi < spec.bfs_fractions.size(); ++fi) {
            LorentzianParams p{1.0, spec.bfs_fractions[fi] * spec.scan_range_mhz,
                               spec.linewidths_mhz[li]};
            const Spectrum ideal = synth_spectrum(p, {0.0, spec.step_mhz, spec.grid_count()});
            const double fitted = fit_bfs(ideal);
            CHECK(fitted == Catch::Approx(spec.bfs_fractions[fi] * spec.scan_range_mhz).margin(1e-6));
        }
    }
}

TEST_CASE("generation is deterministic and worker-independent") {
    const GridSpec spec = small_spec();
    const Dataset a = generate_training_set(spec, 1);
    const Dataset b = generate_training_set(spec, 4);
    CHECK(a.content_hash() == b.content_hash());

    GridSpec other = spec;
    other.base_seed = 78;
    CHECK(generate_training_set(other).content_hash() != a.content_hash());
}

TEST_CASE("test corpus") {
    const GridSpec spec = small_spec();

    SECTION("defaults to 16 dB only with the grid intact") {
        const Dataset t = generate_test_set(spec);
        CHECK(t.meta.snrs_db == std::vector<double>{16.0});
        CHECK(t.columns() == 2 * 3 * 1 * 2);
    }
    SECTION("noise stream is disjoint from training") {
        const Dataset train = generate_training_set(spec);
        const Dataset test = generate_test_set(spec);
        std::set<std::uint64_t> train_hashes;
        for (Eigen::Index c = 0; c < train.inputs.cols(); ++c)
            train_hashes.insert(column_hash(train, c));
        for (Eigen::Index c = 0; c < test.inputs.cols(); ++c)
            CHECK(train_hashes.count(column_hash(test, c)) == 0);
    }
    SECTION("an explicit test seed equal to the training seed is a configuration error") {
        CHECK_THROWS_AS(generate_test_set(spec, 1, {16.0}, spec.base_seed), config_error);
    }
    SECTION("empty linewidth list is rejected") {
        GridSpec bad = spec;
        bad.linewidths_mhz.clear();
        CHECK_THROWS_AS(generate_test_set(bad), domain_error);
    }
    SECTION("fractions outside (0,1) are rejected") {
        GridSpec bad = spec;
        bad.bfs_fractions.push_back(1.2);
        CHECK_THROWS_AS(generate_training_set(bad), domain_error);
    }
}

TEST_CASE("target denormalization") {
    CHECK(denormalize_target(0.5, 156.0) == 78.0);
    CHECK(denormalize_target(0.1, 156.0) == Catch::Approx(15.6).epsilon(1e-15));
    CHECK(denormalize_target(0.9, 156.0) == Catch::Approx(140.4).epsilon(1e-15));
    CHECK_THROWS_AS(denormalize_target(1.2, 156.0), domain_error);
    CHECK(denormalize_target(1.2, 156.0, false) == Catch::Approx(187.2));
}

TEST_CASE("dataset container round trip") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "bfs_test_dataset.bgsd";

    GridSpec g;
    g.linewidths_mhz = {25.0};
    g.bfs_fractions = {0.3, 0.5, 0.7};
    g.snrs_db = {20.0};
    g.realizations_per_snr = 1;
    g.base_seed = 5;
    const Dataset d = generate_training_set(g);
    save_dataset(d, path.string());

    SECTION("bit-identical matrices after the round trip") {
        const Dataset back = load_dataset(path.string());
        CHECK(back.content_hash() == d.content_hash());
        CHECK(back.inputs == d.inputs);
        CHECK(back.targets == d.targets);
        CHECK(back.meta.base_seed == d.meta.base_seed);
        CHECK(back.meta.linewidths_mhz == d.meta.linewidths_mhz);
    }
    SECTION("bad magic is reported distinctly") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("NOTADSET", 8);
        f.close();
        CHECK_THROWS_AS(load_dataset(path.string()), bad_magic_error);
    }
    SECTION("truncation is reported distinctly") {
        const auto full = fs::file_size(path);
        fs::resize_file(path, full - 64);
        CHECK_THROWS_AS(load_dataset(path.string()), truncated_file_error);
    }
    SECTION("dimension mismatch is reported distinctly") {
        // Patch the column-count field (bytes 12..15) to disagree with the grid.
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(12);
        const std::uint32_t wrong = 999;
        f.write(reinterpret_cast<const char*>(&wrong), 4);
        f.close();
        CHECK_THROWS_AS(load_dataset(path.string()), dimension_error);
    }
    fs::remove(path);
}

TEST_CASE("shuffle split") {
    GridSpec g;
    g.linewidths_mhz = {20.0, 30.0};
    g.bfs_fractions = {0.3, 0.5, 0.7, 0.6, 0.4};
    g.snrs_db = {16.0};
    g.realizations_per_snr = 1;
    const Dataset d = generate_training_set(g);  // 10 columns
    REQUIRE(d.columns() == 10);

    SECTION("zero fraction keeps everything") {
        const auto [kept, held] = shuffle_split(d, 0.0, 3);
        CHECK(kept.columns() == 10);
        CHECK(held.columns() == 0);
        CHECK(kept.content_hash() != 0);
    }
    SECTION("half fraction splits 5/5") {
        const auto [kept, held] = shuffle_split(d, 0.5, 3);
        CHECK(kept.columns() == 5);
        CHECK(held.columns() == 5);
    }
    SECTION("column/target pairing is preserved across the partition") {
        const auto [kept, held] = shuffle_split(d, 0.3, 9);
        std::multiset<std::pair<std::uint64_t, double>> original, recombined;
        for (Eigen::Index c = 0; c < d.inputs.cols(); ++c)
            original.insert({column_hash(d, c), d.targets(c)});
        for (Eigen::Index c = 0; c < kept.inputs.cols(); ++c)
            recombined.insert({column_hash(kept, c), kept.targets(c)});
        for (Eigen::Index c = 0; c < held.inputs.cols(); ++c)
            recombined.insert({column_hash(held, c), held.targets(c)});
        CHECK(original == recombined);
    }
    SECTION("deterministic permutation") {
        const auto [a1, b1] = shuffle_split(d, 0.4, 11);
        const auto [a2, b2] = shuffle_split(d, 0.4, 11);
        CHECK(a1.content_hash() == a2.content_hash());
        CHECK(b1.content_hash() == b2.content_hash());
    }
    SECTION("invalid fraction") {
        CHECK_THROWS_AS(shuffle_split(d, 1.0, 1), domain_error);
        CHECK_THROWS_AS(shuffle_split(d, -0.1, 1), domain_error);
    }
}
