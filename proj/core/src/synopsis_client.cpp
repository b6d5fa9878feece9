#include "vstar/synopsis_client.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

namespace vstar {

const char* const kSynopsisInstructionTemplate =
    "I have a prompt \"{PROMPT}\" for video generation. Can you split the process and "
    "describe the states separately? Each state is described in only one sentence and "
    "please consider the coherency between sub-prompts. Please be straightforward and do "
    "not use a narrative style.\n\n"
    "For example, for prompt \"a boy is getting old\", it can be divided into two states, "
    "e.g., \"a young boy\" and \"an old man\".\n\n"
    "Based on this example, can you provide the description? The number of states is not "
    "limited to two.";

std::string render_synopsis_instruction(const std::string& prompt) {
    std::string out = kSynopsisInstructionTemplate;
    const std::string key = "{PROMPT}";
    auto pos = out.find(key);
    if (pos != std::string::npos) out.replace(pos, key.size(), prompt);
    return out;
}

SynopsisClientConfig SynopsisClientConfig::from_env() {
    SynopsisClientConfig cfg;
    if (const char* e = std::getenv("VSTAR_LLM_ENDPOINT")) cfg.endpoint = e;
    if (const char* k = std::getenv("VSTAR_LLM_API_KEY")) cfg.api_key = k;
    return cfg;
}

std::vector<std::string> parse_stage_lines(const std::string& content) {
    std::vector<std::string> stages;
    std::string line;
    std::istringstream iss(content);
    while (std::getline(iss, line)) {
        std::size_t b = 0, e = line.size();
        while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
        std::string s = line.substr(b, e - b);
        if (s.empty()) continue;

        // Strip one leading enumeration token: "1." / "2)" / "3:" / "-" / "*".
        std::size_t i = 0;
        if (i < s.size() && (s[i] == '-' || s[i] == '*')) {
            ++i;
        } else {
            std::size_t j = i;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            if (j > i && j < s.size() && (s[j] == '.' || s[j] == ')' || s[j] == ':'))
                i = j + 1;
        }
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        s = s.substr(i);
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
        if (!s.empty()) stages.push_back(s);
    }
    return stages;
}

namespace {

Synopsis synopsis_from_fixture(const std::string& prompt, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SynopsisError(SynopsisError::Kind::network, "cannot open fixture file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SynopsisError(SynopsisError::Kind::unparseable,
                            std::string("malformed fixture JSON: ") + e.what());
    }
    if (!j.contains("stages") || !j["stages"].is_array())
        throw SynopsisError(SynopsisError::Kind::unparseable, "fixture missing \"stages\" array");
    Synopsis syn;
    syn.original_prompt = j.value("prompt", prompt);
    for (const auto& st : j["stages"])
        if (st.is_string() && !st.get<std::string>().empty()) syn.stages.push_back(st.get<std::string>());
    if (syn.stages.empty())
        throw SynopsisError(SynopsisError::Kind::empty_stages, "fixture stage list is empty");
    return syn;
}

std::string extract_content(const nlohmann::json& j) {
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& c0 = j["choices"][0];
        if (c0.contains("message") && c0["message"].contains("content") &&
            c0["message"]["content"].is_string())
            return c0["message"]["content"].get<std::string>();
        if (c0.contains("text") && c0["text"].is_string()) return c0["text"].get<std::string>();
    }
    if (j.contains("content") && j["content"].is_string()) return j["content"].get<std::string>();
    throw SynopsisError(SynopsisError::Kind::unparseable, "no content field in LLM response");
}

Synopsis synopsis_from_endpoint(const std::string& prompt, const SynopsisClientConfig& cfg) {
    // Split a full URL into scheme://host[:port] and path.
    const std::string& url = cfg.endpoint;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw SynopsisError(SynopsisError::Kind::network, "endpoint URL missing scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    std::string base = (path_start == std::string::npos) ? url : url.substr(0, path_start);
    std::string path = (path_start == std::string::npos) ? "/" : url.substr(path_start);

    nlohmann::json body;
    body["model"] = cfg.model;
    body["messages"] = nlohmann::json::array(
        {{{"role", "user"}, {"content", render_synopsis_instruction(prompt)}}});

    httplib::Client client(base);
    client.set_connection_timeout(cfg.timeout_seconds, 0);
    client.set_read_timeout(cfg.timeout_seconds, 0);
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    auto resp = client.Post(path, headers, body.dump(), "application/json");
    if (!resp)
        throw SynopsisError(SynopsisError::Kind::network,
                            "request to " + cfg.endpoint + " failed: " + httplib::to_string(resp.error()));
    if (resp->status != 200)
        throw SynopsisError(SynopsisError::Kind::network,
                            "endpoint returned HTTP " + std::to_string(resp->status));

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(resp->body);
    } catch (const nlohmann::json::exception& e) {
        throw SynopsisError(SynopsisError::Kind::unparseable,
                            std::string("malformed response JSON: ") + e.what());
    }
    auto stages = parse_stage_lines(extract_content(j));
    if (stages.empty())
        throw SynopsisError(SynopsisError::Kind::empty_stages, "LLM response contained no stages");
    return Synopsis{prompt, std::move(stages)};
}

}  // namespace

Synopsis request_synopsis(const std::string& prompt, const SynopsisClientConfig& config) {
    try {
        if (config.fixture_path) return synopsis_from_fixture(prompt, *config.fixture_path);
        if (config.endpoint.empty())
            throw SynopsisError(SynopsisError::Kind::not_configured,
                                "no synopsis endpoint configured (set VSTAR_LLM_ENDPOINT or pass a fixture)");
        return synopsis_from_endpoint(prompt, config);
    } catch (const SynopsisError& e) {
        if (!config.fallback_to_single_stage) throw;
        std::fprintf(stderr, "[vstar] warning: synopsis request failed (%s); using single-stage fallback\n",
                     e.what());
        return Synopsis{prompt, {prompt}};
    }
}

}  // namespace vstar
