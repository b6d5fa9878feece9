#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vstar/dataset.hpp"
#include "vstar/rng.hpp"
#include "vstar/synopsis_client.hpp"
#include "vstar/vsp.hpp"

using namespace vstar;

namespace {

Matrix seeded_stages(std::size_t k, std::size_t d, std::uint64_t seed) {
    Matrix m(k, d);
    SeededRng rng(seed);
    rng.fill_normal(m);
    return m;
}

// Reconstructs the convex coefficients of a schedule row against the two
// surrounding stage embeddings.
std::pair<double, double> segment_coefficients(const Matrix& stages, std::size_t a, std::size_t b,
                                               const Matrix& row_matrix, std::size_t row) {
    // solve least squares for w in row = (1-w) e_a + w e_b
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < stages.cols(); ++j) {
        double diff = stages.at(b, j) - stages.at(a, j);
        num += (row_matrix.at(row, j) - stages.at(a, j)) * diff;
        den += diff * diff;
    }
    double w = den > 0 ? num / den : 0.0;
    return {1.0 - w, w};
}

}  // namespace

TEST_CASE("K=1 schedule repeats the single embedding bit-exactly") {
    auto stages = seeded_stages(1, 8, 5);
    auto sched = build_schedule(stages, 7);
    for (std::size_t t = 0; t < 7; ++t)
        for (std::size_t j = 0; j < 8; ++j) CHECK(sched.embeddings.at(t, j) == stages.at(0, j));
}

TEST_CASE("K=2 N=3 midpoint by symmetry") {
    auto stages = seeded_stages(2, 4, 6);
    auto sched = build_schedule(stages, 3);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(sched.embeddings.at(0, j) == stages.at(0, j));
        CHECK(sched.embeddings.at(2, j) == stages.at(1, j));
        CHECK(sched.embeddings.at(1, j) ==
              doctest::Approx(0.5 * stages.at(0, j) + 0.5 * stages.at(1, j)));
    }
}

TEST_CASE("K=3 N=16 matches the piecewise-linear oracle") {
    auto stages = seeded_stages(3, 6, 7);
    auto sched = build_schedule(stages, 16);
    // anchors at round(k*15/2): 0, 8 (7.5 rounds up), 15
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(sched.embeddings.at(0, j) == stages.at(0, j));
        CHECK(sched.embeddings.at(15, j) == stages.at(2, j));
        CHECK(std::abs(sched.embeddings.at(8, j) - stages.at(1, j)) < 1e-12);
    }
    // scalar interpolation oracle inside the first segment
    for (std::size_t t = 1; t < 8; ++t) {
        double w = static_cast<double>(t) / 8.0;
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(std::abs(sched.embeddings.at(t, j) -
                           ((1 - w) * stages.at(0, j) + w * stages.at(1, j))) < 1e-12);
    }
}

TEST_CASE("schedule rejects more stages than frames") {
    CHECK_THROWS_AS(build_schedule(seeded_stages(5, 4, 1), 3), std::invalid_argument);
}

TEST_CASE("schedule rows are convex combinations of consecutive stages") {
    SeededRng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t k = 2 + rng.next_below(4);
        std::size_t n = k + rng.next_below(20);
        auto stages = seeded_stages(k, 5, rng.next_u64());
        auto sched = build_schedule(stages, n);
        REQUIRE(sched.anchors.size() == k);
        for (std::size_t seg = 0; seg + 1 < k; ++seg) {
            std::size_t a = static_cast<std::size_t>(sched.anchors[seg].first);
            std::size_t b = static_cast<std::size_t>(sched.anchors[seg + 1].first);
            for (std::size_t t = a; t <= b; ++t) {
                auto [ca, cb] = segment_coefficients(stages, seg, seg + 1, sched.embeddings, t);
                CHECK(ca >= -1e-9);
                CHECK(cb >= -1e-9);
                CHECK(ca + cb == doctest::Approx(1.0));
                // residual of the least-squares fit should vanish
                for (std::size_t j = 0; j < 5; ++j)
                    CHECK(std::abs(sched.embeddings.at(t, j) -
                                   (ca * stages.at(seg, j) + cb * stages.at(seg + 1, j))) < 1e-9);
            }
        }
    }
}

TEST_CASE("schedule is Lipschitz along frames") {
    auto stages = seeded_stages(3, 6, 11);
    const std::size_t n = 13;
    auto sched = build_schedule(stages, n);
    double max_step = 0.0;
    for (std::size_t seg = 0; seg + 1 < 3; ++seg) {
        std::size_t a = static_cast<std::size_t>(sched.anchors[seg].first);
        std::size_t b = static_cast<std::size_t>(sched.anchors[seg + 1].first);
        double d = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            double diff = stages.at(seg + 1, j) - stages.at(seg, j);
            d += diff * diff;
        }
        max_step = std::max(max_step, std::sqrt(d) / static_cast<double>(b - a));
    }
    for (std::size_t t = 0; t + 1 < n; ++t) {
        double d = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            double diff = sched.embeddings.at(t + 1, j) - sched.embeddings.at(t, j);
            d += diff * diff;
        }
        CHECK(std::sqrt(d) <= max_step + 1e-9);
    }
}

TEST_CASE("toy text encoder is deterministic and composes mean + affine") {
    auto enc = TextEncoder::seeded(default_vocab(), 8, 12, 99);

    auto a = toy_text_encode("red fades into blue", enc);
    auto b = toy_text_encode("red fades into blue", enc);
    CHECK(a == b);

    // single token: affine(embedding)
    auto single = toy_text_encode("red", enc);
    int id = enc.token_id("red");
    REQUIRE(id > 0);
    for (std::size_t i = 0; i < 12; ++i) {
        double want = enc.proj_bias[i];
        for (std::size_t j = 0; j < 8; ++j)
            want += enc.proj_weight.at(i, j) * enc.token_embeddings.at(static_cast<std::size_t>(id), j);
        CHECK(single[i] == doctest::Approx(want));
    }

    // two tokens: scalar mean + affine oracle
    auto two = toy_text_encode("red blue", enc);
    int id2 = enc.token_id("blue");
    for (std::size_t i = 0; i < 12; ++i) {
        double want = enc.proj_bias[i];
        for (std::size_t j = 0; j < 8; ++j)
            want += enc.proj_weight.at(i, j) * 0.5 *
                    (enc.token_embeddings.at(static_cast<std::size_t>(id), j) +
                     enc.token_embeddings.at(static_cast<std::size_t>(id2), j));
        CHECK(std::abs(two[i] - want) < 1e-12);
    }

    CHECK_THROWS_AS(toy_text_encode("", enc), std::invalid_argument);
    // unknown token maps to UNK, not an error
    auto unk = toy_text_encode("zzzunknownzzz", enc);
    CHECK(unk.size() == 12);
}

TEST_CASE("stage line parsing accepts numbered, bulleted and bare lines") {
    auto s1 = parse_stage_lines("1. a young boy\n2. an old man");
    REQUIRE(s1.size() == 2);
    CHECK(s1[0] == "a young boy");
    CHECK(s1[1] == "an old man");

    auto s2 = parse_stage_lines("- first\n* second\n\nthird line");
    REQUIRE(s2.size() == 3);
    CHECK(s2[0] == "first");
    CHECK(s2[1] == "second");
    CHECK(s2[2] == "third line");

    auto s3 = parse_stage_lines("3) \"quoted stage\"");
    REQUIRE(s3.size() == 1);
    CHECK(s3[0] == "quoted stage");
}

TEST_CASE("synopsis instruction template substitutes the prompt") {
    auto text = render_synopsis_instruction("a peony blooms");
    CHECK(text.find("\"a peony blooms\"") != std::string::npos);
    CHECK(text.find("{PROMPT}") == std::string::npos);
}

TEST_CASE("fixture file bypasses the network") {
    auto dir = std::filesystem::temp_directory_path() / "vstar_vsp_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "stages.json");
        out << R"({"stages":["lava rises","lava erupts","ash cloud","cooling rock"]})";
    }
    SynopsisClientConfig cfg;
    cfg.fixture_path = (dir / "stages.json").string();
    auto syn = request_synopsis("a volcano erupts", cfg);
    REQUIRE(syn.stages.size() == 4);
    CHECK(syn.stages[0] == "lava rises");
    CHECK(syn.stages[3] == "cooling rock");
    CHECK(syn.original_prompt == "a volcano erupts");
}

TEST_CASE("unreachable endpoint falls back to a single stage") {
    SynopsisClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1";  // nothing listens here
    cfg.timeout_seconds = 1;
    cfg.fallback_to_single_stage = true;
    auto syn = request_synopsis("a boy is getting old", cfg);
    REQUIRE(syn.stages.size() == 1);
    CHECK(syn.stages[0] == "a boy is getting old");
}

TEST_CASE("unreachable endpoint without fallback throws a network error") {
    SynopsisClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1";
    cfg.timeout_seconds = 1;
    cfg.fallback_to_single_stage = false;
    try {
        request_synopsis("x", cfg);
        FAIL("expected SynopsisError");
    } catch (const SynopsisError& e) {
        CHECK(e.kind() == SynopsisError::Kind::network);
    }
}

TEST_CASE("chat completion response parsing against a local server") {
    httplib::Server server;
    std::string seen_body;
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        if (req.has_header("Authorization")) seen_auth = req.get_header_value("Authorization");
        nlohmann::json reply = {
            {"choices",
             {{{"message", {{"content", "1. a young boy\n2. an old man"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&]() { server.listen_after_bind(); });
    server.wait_until_ready();

    SynopsisClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.api_key = "sekrit";
    cfg.fallback_to_single_stage = false;
    auto syn = request_synopsis("a boy is getting old", cfg);
    server.stop();
    t.join();

    REQUIRE(syn.stages.size() == 2);
    CHECK(syn.stages[0] == "a young boy");
    CHECK(syn.stages[1] == "an old man");
    CHECK(seen_auth == "Bearer sekrit");
    auto body = nlohmann::json::parse(seen_body);
    std::string content = body["messages"][0]["content"];
    CHECK(content.find("a boy is getting old") != std::string::npos);
    CHECK(content.find("split the process") != std::string::npos);
}

TEST_CASE("empty stage list from the endpoint is a distinct error") {
    httplib::Server server;
    server.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        nlohmann::json reply = {{"choices", {{{"message", {{"content", "\n \n"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&]() { server.listen_after_bind(); });
    server.wait_until_ready();

    SynopsisClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/chat";
    cfg.fallback_to_single_stage = false;
    try {
        request_synopsis("x", cfg);
        FAIL("expected SynopsisError");
    } catch (const SynopsisError& e) {
        CHECK(e.kind() == SynopsisError::Kind::empty_stages);
    }
    server.stop();
    t.join();
}
