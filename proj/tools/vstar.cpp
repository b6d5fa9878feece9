#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "run_context.hpp"
#include "vstar/synopsis_client.hpp"
#include "vstar/tensor_io.hpp"

namespace {

using nlohmann::json;
using vstar::cli::UsageError;

json parse_kv_entries(const std::vector<std::string>& entries, bool numeric_value,
                      const char* flag) {
    json out = json::object();
    for (const auto& e : entries) {
        auto eq = e.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == e.size())
            throw UsageError(std::string(flag) + " expects level=value, got \"" + e + "\"");
        std::string key = e.substr(0, eq), value = e.substr(eq + 1);
        if (numeric_value) {
            try {
                out[key] = std::stod(value);
            } catch (...) {
                throw UsageError(std::string(flag) + " value is not a number: \"" + value + "\"");
            }
        } else {
            out[key] = value;
        }
    }
    return out;
}

std::vector<double> split_doubles(const std::string& csv, const char* flag) {
    std::vector<double> out;
    std::string cur;
    std::istringstream iss(csv);
    while (std::getline(iss, cur, ',')) {
        try {
            out.push_back(std::stod(cur));
        } catch (...) {
            throw UsageError(std::string(flag) + ": not a number: \"" + cur + "\"");
        }
    }
    return out;
}

std::vector<int> split_ints(const std::string& csv, const char* flag) {
    std::vector<int> out;
    for (double d : split_doubles(csv, flag)) out.push_back(static_cast<int>(d));
    return out;
}

std::vector<std::string> split_strings(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream iss(csv);
    while (std::getline(iss, cur, ',')) out.push_back(cur);
    return out;
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    try {
        json j;
        in >> j;
        if (!j.is_object()) throw UsageError("config file must hold a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed config JSON in ") + path + ": " + e.what());
    }
}

/// Per-subcommand flag state; only flags the user actually passed make it
/// into the resolved config, so config-file values survive underneath.
struct FlagBag {
    CLI::App* app = nullptr;
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t frames = 16;
    int steps = 50;
    std::vector<std::string> sigma, replace;
    std::string synopsis_file, prompt, checkpoint, out, data, spec, reference, caption;
    std::string grid, sigmas, levels, prompts, intervals, t_ref, feature, level, pe, channels;
    std::string manifest;
    std::vector<std::string> attention, video;
    std::size_t size = 16, bins = 16;
    int train_steps = 600, min_timestep = 20, opt_steps = 30, sample_steps = 4, heads = 2,
        diffusion_steps = 1000;
    double lr = 2e-3, lambda = 1.0, step_size = 0.05, fd_step = 1e-3;
    bool no_tar = false, no_temporal_conv = false;

    json resolve() const {
        json cfg = config_path.empty() ? json::object() : load_config_file(config_path);
        auto passed = [&](const char* flag) {
            const CLI::Option* o = app->get_option_no_throw(flag);
            return o != nullptr && o->count() > 0;
        };
        if (passed("--seed")) cfg["seed"] = seed;
        if (passed("--frames")) cfg["frames"] = frames;
        if (passed("--steps")) cfg["steps"] = steps;
        if (passed("--sigma")) cfg["sigma"] = parse_kv_entries(sigma, true, "--sigma");
        if (passed("--replace")) cfg["replace"] = parse_kv_entries(replace, false, "--replace");
        if (passed("--synopsis-file")) cfg["synopsis_file"] = synopsis_file;
        if (passed("--prompt")) cfg["prompt"] = prompt;
        if (passed("--checkpoint")) cfg["checkpoint"] = checkpoint;
        if (passed("--out")) cfg["out"] = out;
        if (passed("--data")) cfg["data"] = data;
        if (passed("--spec")) cfg["spec"] = spec;
        if (passed("--reference")) cfg["reference"] = reference;
        if (passed("--caption")) cfg["caption"] = caption;
        if (passed("--size")) cfg["size"] = size;
        if (passed("--bins")) cfg["bins"] = bins;
        if (passed("--train-steps")) cfg["train_steps"] = train_steps;
        if (passed("--min-timestep")) cfg["min_timestep"] = min_timestep;
        if (passed("--lr")) cfg["lr"] = lr;
        if (passed("--heads")) cfg["heads"] = heads;
        if (passed("--diffusion-steps")) cfg["diffusion_steps"] = diffusion_steps;
        if (passed("--channels")) {
            std::vector<std::size_t> ch;
            for (double d : split_doubles(channels, "--channels"))
                ch.push_back(static_cast<std::size_t>(d));
            cfg["channels"] = ch;
        }
        if (passed("--pe")) cfg["pe"] = pe;
        if (passed("--grid")) cfg["grid"] = grid;
        if (passed("--sigmas")) cfg["sigmas"] = split_doubles(sigmas, "--sigmas");
        if (passed("--levels")) cfg["levels"] = split_strings(levels);
        if (passed("--prompts")) cfg["prompts"] = split_strings(prompts);
        if (passed("--intervals")) cfg["intervals"] = split_ints(intervals, "--intervals");
        if (passed("--t-ref")) cfg["t_ref"] = split_ints(t_ref, "--t-ref");
        if (passed("--feature")) cfg["feature"] = feature;
        if (passed("--level")) cfg["level"] = level;
        if (passed("--lambda")) cfg["lambda"] = lambda;
        if (passed("--opt-steps")) cfg["opt_steps"] = opt_steps;
        if (passed("--step-size")) cfg["step_size"] = step_size;
        if (passed("--sample-steps")) cfg["sample_steps"] = sample_steps;
        if (passed("--fd-step")) cfg["fd_step"] = fd_step;
        if (passed("--attention")) cfg["attention"] = attention;
        if (passed("--video")) cfg["video"] = video;
        if (passed("--manifest")) cfg["manifest"] = manifest;
        if (passed("--no-tar")) cfg["no_tar"] = no_tar;
        if (passed("--no-temporal-conv")) cfg["temporal_conv"] = !no_temporal_conv;
        return cfg;
    }
};

void add_common(FlagBag& f) {
    f.app->add_option("--config", f.config_path, "JSON config file (flags take precedence)");
    f.app->add_option("--seed", f.seed, "base RNG seed");
    f.app->add_option("--out", f.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vstar: steering temporal dynamics of a toy latent video denoiser"};
    app.require_subcommand(1);

    std::vector<std::pair<std::string, FlagBag>> bags;
    bags.reserve(16);

    auto make = [&](const char* name, const char* desc) -> FlagBag& {
        bags.emplace_back(name, FlagBag{});
        FlagBag& f = bags.back().second;
        f.app = app.add_subcommand(name, desc);
        add_common(f);
        return f;
    };

    {
        FlagBag& f = make("generate-data", "render the procedural video dataset");
        f.app->add_option("--spec", f.spec, "JSON list of video specs");
        f.app->add_option("--frames", f.frames, "frames per video");
        f.app->add_option("--size", f.size, "square frame resolution");
    }
    {
        FlagBag& f = make("train", "train the toy denoiser on a dataset directory");
        f.app->add_option("--data", f.data, "dataset directory (from generate-data)");
        f.app->add_option("--train-steps", f.train_steps, "optimizer steps");
        f.app->add_option("--lr", f.lr, "Adam learning rate");
        f.app->add_option("--min-timestep", f.min_timestep, "lowest training timestep");
        f.app->add_option("--channels", f.channels, "per-level channels, e.g. 16,32,32");
        f.app->add_option("--heads", f.heads, "attention heads");
        f.app->add_option("--pe", f.pe, "none | absolute_sinusoidal | rotary_relative");
        f.app->add_option("--diffusion-steps", f.diffusion_steps, "forward-process steps T");
    }
    auto add_sampling_flags = [](FlagBag& f, bool with_synopsis) {
        f.app->add_option("--checkpoint", f.checkpoint, "checkpoint directory");
        f.app->add_option("--prompt", f.prompt, "text prompt");
        f.app->add_option("--frames", f.frames, "frames to generate");
        f.app->add_option("--steps", f.steps, "DDIM steps");
        f.app->add_option("--sigma", f.sigma, "regularize level=sigma (repeatable)");
        f.app->add_option("--replace", f.replace, "replace level=identity|uniform (repeatable)");
        f.app->add_flag("--no-temporal-conv", f.no_temporal_conv, "disable the temporal conv");
        if (with_synopsis) {
            f.app->add_option("--synopsis-file", f.synopsis_file, "JSON {\"stages\": [...]}");
            f.app->add_flag("--no-tar", f.no_tar, "disable the default attention regularization");
        }
    };
    {
        FlagBag& f = make("sample", "baseline sampling from a checkpoint");
        add_sampling_flags(f, false);
    }
    {
        FlagBag& f = make("nurse", "sampling with synopsis conditioning and attention regularization");
        add_sampling_flags(f, true);
    }
    {
        FlagBag& f = make("ablate", "sigma or replacement grids over a prompt suite");
        f.app->add_option("--checkpoint", f.checkpoint, "checkpoint directory");
        f.app->add_option("--grid", f.grid, "sigma | replace");
        f.app->add_option("--sigmas", f.sigmas, "comma list, e.g. 8,4,1");
        f.app->add_option("--levels", f.levels, "comma list of levels (top or resolutions)");
        f.app->add_option("--prompts", f.prompts, "comma list of prompts (default: built-in suite)");
        f.app->add_option("--frames", f.frames, "frames per run");
        f.app->add_option("--steps", f.steps, "DDIM steps per run");
    }
    {
        FlagBag& f = make("extract", "dump real-video temporal attention from a dataset");
        f.app->add_option("--checkpoint", f.checkpoint, "checkpoint directory");
        f.app->add_option("--data", f.data, "dataset directory");
        f.app->add_option("--t-ref", f.t_ref, "comma list of extraction timesteps");
    }
    {
        FlagBag& f = make("analyze", "band profiles, similarity matrices, interval histograms");
        f.app->add_option("--attention", f.attention, "label=dir of attention dumps (repeatable)");
        f.app->add_option("--video", f.video, "label=dir (or file) of video tensors (repeatable)");
        f.app->add_option("--intervals", f.intervals, "comma list of frame offsets");
        f.app->add_option("--bins", f.bins, "histogram bins");
        f.app->add_option("--feature", f.feature, "pixel | projection");
    }
    {
        FlagBag& f = make("noise-opt", "optimize the initial-noise distribution against a reference");
        f.app->add_option("--checkpoint", f.checkpoint, "checkpoint directory");
        f.app->add_option("--reference", f.reference, "reference video .vstr");
        f.app->add_option("--caption", f.caption, "conditioning caption");
        f.app->add_option("--frames", f.frames, "frames to synthesize and match");
        f.app->add_option("--steps", f.steps, "DDIM steps for the before/after renders");
        f.app->add_option("--lambda", f.lambda, "KL weight");
        f.app->add_option("--opt-steps", f.opt_steps, "gradient steps");
        f.app->add_option("--step-size", f.step_size, "gradient step size");
        f.app->add_option("--sample-steps", f.sample_steps, "DDIM steps inside the loss");
        f.app->add_option("--level", f.level, "attention level to match");
        f.app->add_option("--t-ref", f.t_ref, "comma list of reference timesteps");
        f.app->add_option("--fd-step", f.fd_step, "central-difference step");
    }
    {
        FlagBag& f = make("synopsis", "split a prompt into staged sub-prompts");
        f.app->add_option("--prompt", f.prompt, "text prompt");
        f.app->add_option("--synopsis-file", f.synopsis_file, "fixture JSON (bypasses the LLM)");
    }
    {
        FlagBag& f = make("replay", "re-execute a recorded run and diff its outputs");
        f.app->add_option("--manifest", f.manifest, "manifest.json of the original run");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? vstar::cli::kExitOk : vstar::cli::kExitUsage;
    }

    try {
        for (auto& [name, f] : bags)
            if (f.app->parsed()) {
                auto fn = vstar::cli::find_command(name);
                return fn(f.resolve());
            }
        std::fprintf(stderr, "no subcommand given\n");
        return vstar::cli::kExitUsage;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return vstar::cli::kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return vstar::cli::kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return vstar::cli::kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return vstar::cli::kExitRuntime;
    }
}
