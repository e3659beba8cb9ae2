#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wedgefill/checkpoint.hpp"
#include "wedgefill/config.hpp"
#include "wedgefill/dataset.hpp"
#include "wedgefill/pgm.hpp"
#include "wedgefill/tensor_io.hpp"

using namespace wedgefill;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path d = fs::temp_directory_path() / "wedgefill_io_test";
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("tensor container round-trips bit-exactly") {
    Rng rng(100);
    for (int rep = 0; rep < 20; ++rep) {
        TensorContainer tc;
        const int n_entries = 1 + static_cast<int>(rng.uniform_index(5));
        for (int e = 0; e < n_entries; ++e) {
            std::vector<uint32_t> dims;
            const int nd = 1 + static_cast<int>(rng.uniform_index(3));
            for (int d = 0; d < nd; ++d) dims.push_back(1 + static_cast<uint32_t>(rng.uniform_index(7)));
            NamedTensor& t = tc.add("entry_" + std::to_string(rep) + "_" + std::to_string(e), dims);
            for (float& f : t.data) f = static_cast<float>(rng.normal());
        }
        const std::string bytes = serialize(tc);
        TensorContainer back = deserialize_container(bytes);
        REQUIRE(back.entries.size() == tc.entries.size());
        for (size_t e = 0; e < tc.entries.size(); ++e) {
            REQUIRE(back.entries[e].name == tc.entries[e].name);
            REQUIRE(back.entries[e].dims == tc.entries[e].dims);
            REQUIRE(std::memcmp(back.entries[e].data.data(), tc.entries[e].data.data(),
                                tc.entries[e].data.size() * 4) == 0);
        }
        REQUIRE(serialize(back) == bytes);
    }
}

TEST_CASE("tensor container rejects malformed input") {
    TensorContainer tc;
    tc.add("a", {2, 2});
    REQUIRE_THROWS(tc.add("a", {1}));  // duplicate name
    std::string bytes = serialize(tc);
    REQUIRE_THROWS(deserialize_container("BADMAGIC" + bytes.substr(8)));
    REQUIRE_THROWS(deserialize_container(bytes.substr(0, bytes.size() - 1)));  // truncated
    REQUIRE_THROWS(deserialize_container(bytes + "x"));                        // trailing
}

TEST_CASE("container file save/load through the atomic writer") {
    fs::path p = temp_dir() / "roundtrip.tn";
    TensorContainer tc;
    NamedTensor& t = tc.add("grid", {3, 4});
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<float>(i) * 0.25f;
    save_container(p, tc);
    TensorContainer back = load_container(p);
    REQUIRE(back.at("grid").data == t.data);
    REQUIRE(!fs::exists(p.string() + ".tmp"));
}

TEST_CASE("pgm16 header and payload contract") {
    Grid img(2, 3);
    img.v = {0.0, 0.5, 1.0, -0.2, 1.3, 0.25};
    const std::string bytes = encode_pgm16(img);
    const std::string header = "P5\n3 2\n65535\n";
    REQUIRE(bytes.compare(0, header.size(), header) == 0);
    REQUIRE(bytes.size() == header.size() + 6 * 2);
    auto px = [&](int i) {
        const size_t o = header.size() + 2 * i;
        return (static_cast<uint16_t>(static_cast<uint8_t>(bytes[o])) << 8) |
               static_cast<uint8_t>(bytes[o + 1]);
    };
    REQUIRE(px(0) == 0);
    REQUIRE(px(1) == 32768);  // lround(0.5 * 65535)
    REQUIRE(px(2) == 65535);
    REQUIRE(px(3) == 0);      // clamped below
    REQUIRE(px(4) == 65535);  // clamped above
}

TEST_CASE("config parse -> serialize -> parse is a fixed point") {
    RunConfig cfg;
    cfg.image_size = 64;
    cfg.num_angles = 90;
    cfg.angle_step_deg = 2.0;
    cfg.detector_bins = 92;
    cfg.lambda = 0.15;
    cfg.scenarios_deg = {60.0, 90.0};
    const std::string text = serialize_config(cfg);
    RunConfig back = parse_config_text(text);
    REQUIRE(serialize_config(back) == text);
    REQUIRE(config_hash(back) == config_hash(cfg));
    // defaults survive an empty config
    RunConfig dflt = parse_config_text("");
    REQUIRE(serialize_config(dflt) == serialize_config(RunConfig{}));
}

TEST_CASE("config rejects unknown keys and bad values") {
    REQUIRE_THROWS_AS(parse_config_text("[geometry]\nbogus = 1\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("[geometry]\nimage_size = abc\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("[geometry\nimage_size = 64\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("image_size 64\n"), ConfigError);
    // comments and blank lines are fine
    RunConfig c = parse_config_text("# comment\n\n[geometry]\nimage_size = 64\n");
    REQUIRE(c.image_size == 64);
    // validation catches inconsistent settings
    RunConfig bad;
    bad.image_size = 256;  // detector no longer covers the support
    REQUIRE_THROWS_AS(validate_config(bad), std::exception);
    RunConfig bad2;
    bad2.lambda = 0.0;
    REQUIRE_THROWS_AS(validate_config(bad2), ConfigError);
}

TEST_CASE("raw slice import applies the HU window") {
    fs::path dir = temp_dir();
    fs::path p = dir / "slice.raw";
    const int n = 16;
    std::vector<float> hu(static_cast<size_t>(n) * n, 125.0f);  // midpoint of [-250, 500]
    hu[0] = -250.0f;
    hu[1] = 500.0f;
    hu[2] = -1000.0f;  // clamped to 0
    hu[3] = 2000.0f;   // clamped to 1
    {
        std::ofstream f(p, std::ios::binary);
        f.write(reinterpret_cast<const char*>(hu.data()), static_cast<std::streamsize>(hu.size() * 4));
    }
    Image img = load_raw_slice(p, n, -250.0, 500.0);
    REQUIRE(img.v[0] == 0.0);
    REQUIRE(img.v[1] == 1.0);
    REQUIRE(img.v[2] == 0.0);
    REQUIRE(img.v[3] == 1.0);
    REQUIRE(img.v[4] == Catch::Approx(0.5).epsilon(1e-12));
    // wrong size and non-finite values are rejected
    REQUIRE_THROWS(load_raw_slice(p, n + 1, -250.0, 500.0));
    hu[5] = std::numeric_limits<float>::quiet_NaN();
    {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        f.write(reinterpret_cast<const char*>(hu.data()), static_cast<std::streamsize>(hu.size() * 4));
    }
    REQUIRE_THROWS(load_raw_slice(p, n, -250.0, 500.0));
}

TEST_CASE("dataset synthesis is deterministic and round-trips") {
    ScanGeometry geo{45, 4.0, 46, 1.0};
    Dataset a = synthesize_dataset(32, geo, 3, 2, 7);
    Dataset b = synthesize_dataset(32, geo, 3, 2, 7);
    REQUIRE(serialize(dataset_to_container(a, {60.0})) == serialize(dataset_to_container(b, {60.0})));
    // container round trip preserves the float32 representation
    TensorContainer tc = dataset_to_container(a, {60.0});
    Dataset back = dataset_from_container(deserialize_container(serialize(tc)));
    REQUIRE(back.num_train == a.num_train);
    REQUIRE(back.num_test() == a.num_test());
    REQUIRE(back.geo == a.geo);
    REQUIRE(serialize(dataset_to_container(back, {60.0})) == serialize(tc));
    // the stored mask matches make_wedge_mask
    const NamedTensor& m = tc.at("mask/60");
    AngleMask ref = make_wedge_mask(geo, 60.0);
    for (size_t i = 0; i < ref.kept.size(); ++i)
        REQUIRE((m.data[i] != 0.0f) == (ref.kept[i] != 0));
}

TEST_CASE("checkpoint round-trips parameters and moments bit-exactly") {
    NetSpec spec{3, 1, 4, 1};
    Rng rng(55);
    Checkpoint ck;
    ck.spec = spec;
    ck.params = init_params(spec, rng.derive(0));
    ck.params.step_count = 1234;
    ck.config_hash = 0xDEADBEEFCAFEF00DULL;
    ck.seed = 42;
    // fill values and moments with irrational-looking doubles
    for (ParamEntry& e : ck.params.entries) {
        for (double& x : e.value.data) x = rng.normal() * 1e-3 + 0.1;
        for (double& x : e.m.data) x = rng.normal() * 1e-7;
        for (double& x : e.v.data) x = std::fabs(rng.normal()) * 1e-9;
    }
    fs::path p = temp_dir() / "ck.tn";
    save_checkpoint(p, ck);
    Checkpoint back = load_checkpoint(p);
    REQUIRE(back.spec.in_channels == spec.in_channels);
    REQUIRE(back.spec.stacking_depth == spec.stacking_depth);
    REQUIRE(back.params.step_count == 1234);
    REQUIRE(back.config_hash == ck.config_hash);
    REQUIRE(back.seed == ck.seed);
    for (size_t e = 0; e < ck.params.entries.size(); ++e) {
        REQUIRE(back.params.entries[e].value.data == ck.params.entries[e].value.data);
        REQUIRE(back.params.entries[e].m.data == ck.params.entries[e].m.data);
        REQUIRE(back.params.entries[e].v.data == ck.params.entries[e].v.data);
    }
}
