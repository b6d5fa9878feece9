#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const char* kBin = VSTAR_BIN;
const fs::path kFixtures = VSTAR_FIXTURES;

fs::path work_root() {
    auto dir = fs::temp_directory_path() / "vstar_cli_test";
    fs::create_directories(dir);
    return dir;
}

int run(const std::vector<std::string>& args) {
    std::ostringstream cmd;
    cmd << '"' << kBin << '"';
    for (const auto& a : args) cmd << " \"" << a << '"';
    cmd << " > /dev/null 2>&1";
    int rc = std::system(cmd.str().c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return sa == sb;
}

// One tiny checkpoint shared by the test cases below.
struct TinyWorld {
    fs::path root, data, ckpt;
    TinyWorld() {
        root = work_root() / "world";
        data = root / "data";
        ckpt = root / "ckpt";
        if (!fs::exists(ckpt / "config.json")) {
            REQUIRE(run({"generate-data", "--out", data.string(), "--frames", "6", "--size", "8",
                         "--seed", "3"}) == 0);
            REQUIRE(run({"train", "--data", data.string(), "--out", ckpt.string(),
                         "--train-steps", "40", "--channels", "4,6,6", "--diffusion-steps", "50",
                         "--min-timestep", "5", "--seed", "1"}) == 0);
        }
    }
};

TinyWorld& world() {
    static TinyWorld w;
    return w;
}

}  // namespace

TEST_CASE("generate-data is byte-deterministic per invocation") {
    auto root = work_root();
    fs::remove_all(root / "d1");
    fs::remove_all(root / "d2");
    REQUIRE(run({"generate-data", "--out", (root / "d1").string(), "--frames", "4", "--size", "8",
                 "--seed", "5"}) == 0);
    REQUIRE(run({"generate-data", "--out", (root / "d2").string(), "--frames", "4", "--size", "8",
                 "--seed", "5"}) == 0);
    for (const auto& e : fs::directory_iterator(root / "d1")) {
        if (e.path().filename() == "manifest.json") continue;
        CHECK(same_bytes(e.path(), root / "d2" / e.path().filename()));
    }
    // default spec produces one file per spec entry plus index and manifest
    std::size_t vstr_count = 0;
    for (const auto& e : fs::directory_iterator(root / "d1"))
        if (e.path().extension() == ".vstr") ++vstr_count;
    CHECK(vstr_count == 16);
}

TEST_CASE("exit codes: 0 success, 2 usage, 3 runtime") {
    auto root = work_root();
    CHECK(run({"synopsis", "--prompt", "hello world", "--out", (root / "s").string()}) == 0);

    auto bad = root / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK(run({"generate-data", "--spec", bad.string(), "--out", (root / "x").string()}) == 2);

    CHECK(run({"noise-opt", "--checkpoint", "c", "--out", (root / "y").string()}) == 2);
    CHECK(run({"sample", "--checkpoint", (root / "missing").string(), "--prompt", "p", "--out",
               (root / "z").string()}) == 3);
    CHECK(run({"frobnicate"}) == 2);
}

TEST_CASE("config file keys merge under flags and unknown keys are rejected") {
    auto root = work_root();
    auto cfg = root / "cfg.json";
    std::ofstream(cfg) << R"({"prompt": "from config", "out": ")" << (root / "cfg_out").string()
                       << R"("})";
    CHECK(run({"synopsis", "--config", cfg.string()}) == 0);
    {
        std::ifstream in(root / "cfg_out" / "synopsis.json");
        nlohmann::json j;
        in >> j;
        CHECK(j["original_prompt"] == "from config");
    }
    // flag wins over the config file
    CHECK(run({"synopsis", "--config", cfg.string(), "--prompt", "from flag"}) == 0);
    {
        std::ifstream in(root / "cfg_out" / "synopsis.json");
        nlohmann::json j;
        in >> j;
        CHECK(j["original_prompt"] == "from flag");
    }

    auto bad = root / "bad_key.json";
    std::ofstream(bad) << R"({"nonsense_key": 1})";
    CHECK(run({"synopsis", "--prompt", "x", "--config", bad.string(), "--out",
               (root / "never").string()}) == 2);
}

TEST_CASE("manifest config round-trips through --config") {
    auto& w = world();
    auto root = work_root();
    fs::remove_all(root / "r1");
    fs::remove_all(root / "r2");
    REQUIRE(run({"sample", "--checkpoint", w.ckpt.string(), "--prompt", "red fades into blue",
                 "--frames", "6", "--steps", "4", "--seed", "11", "--out",
                 (root / "r1").string()}) == 0);

    nlohmann::json manifest;
    std::ifstream(root / "r1" / "manifest.json") >> manifest;
    nlohmann::json cfg = manifest["config"];
    cfg["out"] = (root / "r2").string();
    auto cfg_path = root / "roundtrip.json";
    std::ofstream(cfg_path) << cfg.dump();

    REQUIRE(run({"sample", "--config", cfg_path.string()}) == 0);
    nlohmann::json manifest2;
    std::ifstream(root / "r2" / "manifest.json") >> manifest2;
    nlohmann::json cfg2 = manifest2["config"];
    cfg2["out"] = cfg["out"];
    CHECK(cfg2.dump() == cfg.dump());
    CHECK(same_bytes(root / "r1" / "video.vstr", root / "r2" / "video.vstr"));
}

TEST_CASE("nurse defaults to sigma top=1 and --no-tar disables it") {
    auto& w = world();
    auto root = work_root();
    fs::remove_all(root / "n1");
    REQUIRE(run({"nurse", "--checkpoint", w.ckpt.string(), "--prompt", "red fades into blue",
                 "--frames", "6", "--steps", "3", "--seed", "2", "--out",
                 (root / "n1").string()}) == 0);
    nlohmann::json manifest;
    std::ifstream(root / "n1" / "manifest.json") >> manifest;
    REQUIRE(manifest["config"].contains("sigma"));
    CHECK(manifest["config"]["sigma"]["top"] == 1.0);
}

TEST_CASE("nurse with K=1 synopsis and no TAR reproduces the sample baseline byte-for-byte") {
    auto& w = world();
    auto root = work_root();
    fs::remove_all(root / "b1");
    fs::remove_all(root / "b2");
    REQUIRE(run({"sample", "--checkpoint", w.ckpt.string(), "--prompt", "a bright disk grows larger",
                 "--frames", "6", "--steps", "4", "--seed", "17", "--out",
                 (root / "b1").string()}) == 0);
    REQUIRE(run({"nurse", "--checkpoint", w.ckpt.string(), "--prompt", "a bright disk grows larger",
                 "--no-tar", "--frames", "6", "--steps", "4", "--seed", "17", "--out",
                 (root / "b2").string()}) == 0);
    CHECK(same_bytes(root / "b1" / "video.vstr", root / "b2" / "video.vstr"));
    CHECK(same_bytes(root / "b1" / "metrics.csv", root / "b2" / "metrics.csv"));
    for (const auto& e : fs::directory_iterator(root / "b1" / "frames"))
        CHECK(same_bytes(e.path(), root / "b2" / "frames" / e.path().filename()));
}

TEST_CASE("ablate: uniform replacement kills dynamics, identity preserves them") {
    auto& w = world();
    auto root = work_root();
    fs::remove_all(root / "abl");
    REQUIRE(run({"ablate", "--checkpoint", w.ckpt.string(), "--grid", "replace", "--levels", "top",
                 "--frames", "6", "--steps", "4", "--seed", "0", "--out",
                 (root / "abl").string()}) == 0);
    std::ifstream in(root / "abl" / "means.csv");
    std::string line;
    std::getline(in, line);  // header
    double base = -1, ident = -1, unif = -1;
    while (std::getline(in, line)) {
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 + 1);
        std::string cell = line.substr(0, c1);
        double ds = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        if (cell == "baseline") base = ds;
        if (cell == "replace_identity_top") ident = ds;
        if (cell == "replace_uniform_top") unif = ds;
    }
    REQUIRE(base >= 0);
    REQUIRE(ident >= 0);
    REQUIRE(unif >= 0);
    CHECK(unif < base);
    CHECK(ident > unif);
}

TEST_CASE("analyze on pinned fixture dumps reproduces the golden CSVs byte-for-byte") {
    auto root = work_root();
    fs::remove_all(root / "golden_run");
    REQUIRE(run({"analyze", "--attention", "fix=" + (kFixtures / "attention_fixture").string(),
                 "--out", (root / "golden_run").string()}) == 0);
    CHECK(same_bytes(root / "golden_run" / "band_profiles.csv",
                     kFixtures / "analyze_golden" / "band_profiles.csv"));
    CHECK(same_bytes(root / "golden_run" / "band_energy.csv",
                     kFixtures / "analyze_golden" / "band_energy.csv"));
}

TEST_CASE("analyze requires at least one input") {
    auto root = work_root();
    CHECK(run({"analyze", "--out", (root / "empty").string()}) == 2);
}

TEST_CASE("nurse generates 48 frames beyond the training length in one pass") {
    auto& w = world();
    auto root = work_root();
    fs::remove_all(root / "long");
    std::ofstream(root / "stages48.json")
        << R"({"stages":["a tiny disk","a growing disk","a grown disk"]})";
    REQUIRE(run({"nurse", "--checkpoint", w.ckpt.string(), "--synopsis-file",
                 (root / "stages48.json").string(), "--sigma", "top=1", "--frames", "48",
                 "--steps", "6", "--seed", "3", "--out", (root / "long").string()}) == 0);
    std::size_t ppm = 0;
    for (const auto& e : fs::directory_iterator(root / "long" / "frames"))
        if (e.path().extension() == ".ppm") ++ppm;
    CHECK(ppm == 48);
}

TEST_CASE("synopsis reads the endpoint and bearer token from the environment") {
    httplib::Server server;
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (req.has_header("Authorization")) seen_auth = req.get_header_value("Authorization");
        nlohmann::json reply = {
            {"choices", {{{"message", {{"content", "1. winter field\n2. first thaw\n3. spring bloom"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&]() { server.listen_after_bind(); });
    server.wait_until_ready();

    auto root = work_root();
    fs::remove_all(root / "env_syn");
    std::ostringstream cmd;
    cmd << "VSTAR_LLM_ENDPOINT=http://127.0.0.1:" << port << "/v1/chat/completions "
        << "VSTAR_LLM_API_KEY=token123 \"" << kBin
        << "\" synopsis --prompt \"a landscape turning from winter to spring\" --out \""
        << (root / "env_syn").string() << "\" > /dev/null 2>&1";
    int rc = std::system(cmd.str().c_str());
    server.stop();
    t.join();
    REQUIRE(WEXITSTATUS(rc) == 0);
    CHECK(seen_auth == "Bearer token123");
    nlohmann::json j;
    std::ifstream(root / "env_syn" / "synopsis.json") >> j;
    REQUIRE(j["stages"].size() == 3);
    CHECK(j["stages"][0] == "winter field");
    CHECK(j["stages"][2] == "spring bloom");
}

TEST_CASE("noise-opt with zero steps reports the default parameters") {
    auto& w = world();
    auto root = work_root();
    fs::remove_all(root / "nop0");
    REQUIRE(run({"noise-opt", "--checkpoint", w.ckpt.string(), "--reference",
                 (w.data / "video_000.vstr").string(), "--caption", "red fades into blue",
                 "--frames", "4", "--opt-steps", "0", "--sample-steps", "2", "--steps", "3",
                 "--seed", "1", "--out", (root / "nop0").string()}) == 0);
    nlohmann::json params;
    std::ifstream(root / "nop0" / "params.json") >> params;
    CHECK(params["mu"] == 0.0);
    CHECK(params["beta"] == 1.0);
    CHECK(params["gamma"] == 0.0);
}
