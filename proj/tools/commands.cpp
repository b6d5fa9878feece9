#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "run_context.hpp"
#include "vstar/analysis.hpp"
#include "vstar/csv.hpp"
#include "vstar/denoiser.hpp"
#include "vstar/image_io.hpp"
#include "vstar/noise_opt.hpp"
#include "vstar/regularizer.hpp"
#include "vstar/synopsis_client.hpp"
#include "vstar/tensor_io.hpp"

namespace vstar::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void reject_unknown_keys(const json& cfg, const std::set<std::string>& allowed) {
    for (auto it = cfg.begin(); it != cfg.end(); ++it)
        if (!allowed.count(it.key()))
            throw UsageError("unknown config key \"" + it.key() + "\"");
}

void require_keys(const json& cfg, const std::vector<std::string>& keys) {
    for (const auto& k : keys)
        if (!cfg.contains(k)) throw UsageError("missing required option --" + k);
}

std::string num(double v) { return CsvWriter::format_double(v); }

int resolve_level(const std::string& name, const ModelConfig& cfg) {
    if (name == "top") return cfg.top_level();
    int lvl = 0;
    try {
        lvl = std::stoi(name);
    } catch (...) {
        throw UsageError("bad level \"" + name + "\" (use \"top\" or a resolution)");
    }
    if (!cfg.attention_levels().count(lvl))
        throw UsageError("level " + name + " not present in the model");
    return lvl;
}

std::vector<AttentionHook> hooks_from_config(const json& cfg, const ModelConfig& mc,
                                             std::size_t n_frames) {
    std::vector<AttentionHook> hooks;
    if (cfg.contains("replace"))
        for (auto it = cfg["replace"].begin(); it != cfg["replace"].end(); ++it) {
            int lvl = resolve_level(it.key(), mc);
            std::string kind = it.value().get<std::string>();
            if (kind != "identity" && kind != "uniform")
                throw UsageError("replace kind must be identity or uniform, got " + kind);
            hooks.push_back(AttentionHook::replace(
                extreme_matrix(n_frames, kind == "identity" ? ExtremeKind::identity
                                                            : ExtremeKind::uniform),
                {lvl}));
        }
    if (cfg.contains("sigma"))
        for (auto it = cfg["sigma"].begin(); it != cfg["sigma"].end(); ++it) {
            int lvl = resolve_level(it.key(), mc);
            double s = it.value().get<double>();
            if (!(s > 0.0)) throw UsageError("sigma must be positive");
            hooks.push_back(
                AttentionHook::regularize(build_gaussian_toeplitz(n_frames, s), {lvl}));
        }
    return hooks;
}

std::vector<SyntheticVideoSpec> specs_from_json(const json& arr) {
    std::vector<SyntheticVideoSpec> specs;
    if (!arr.is_array() || arr.empty()) throw UsageError("dataset spec must be a non-empty JSON array");
    for (const auto& e : arr) {
        SyntheticVideoSpec s;
        if (!e.contains("motif") || !e["motif"].is_string())
            throw UsageError("dataset spec entry missing \"motif\"");
        s.motif = e["motif"].get<std::string>();
        s.caption = e.value("caption", std::string("a scene changes over time"));
        if (e.contains("params"))
            for (auto it = e["params"].begin(); it != e["params"].end(); ++it)
                s.params[it.key()] = it.value().get<double>();
        specs.push_back(std::move(s));
    }
    return specs;
}

json specs_to_json(const std::vector<SyntheticVideoSpec>& specs) {
    json arr = json::array();
    for (const auto& s : specs) {
        json e;
        e["motif"] = s.motif;
        e["caption"] = s.caption;
        e["params"] = s.params;
        arr.push_back(std::move(e));
    }
    return arr;
}

struct LoadedDataset {
    std::vector<DatasetItem> items;
    std::size_t height = 0, width = 0;
};

LoadedDataset load_dataset_dir(const fs::path& dir) {
    std::ifstream in(dir / "index.json");
    if (!in) throw std::runtime_error("dataset index.json not found in " + dir.string());
    json idx;
    in >> idx;
    LoadedDataset ds;
    for (const auto& e : idx.at("videos")) {
        Tensor t = tensor_read(dir / e.at("file").get<std::string>());
        ds.items.push_back(DatasetItem{ToyLatentVideo(std::move(t)), e.at("caption").get<std::string>()});
    }
    if (ds.items.empty()) throw std::runtime_error("dataset is empty: " + dir.string());
    ds.height = ds.items[0].video.height();
    ds.width = ds.items[0].video.width();
    return ds;
}

Synopsis resolve_synopsis(const json& cfg) {
    const std::string prompt = cfg.value("prompt", std::string());
    if (cfg.contains("synopsis_file")) {
        SynopsisClientConfig scc;
        scc.fixture_path = cfg["synopsis_file"].get<std::string>();
        scc.fallback_to_single_stage = false;
        return request_synopsis(prompt.empty() ? "(fixture prompt)" : prompt, scc);
    }
    if (prompt.empty()) throw UsageError("need --prompt or --synopsis-file");
    auto scc = SynopsisClientConfig::from_env();
    if (scc.endpoint.empty()) return Synopsis{prompt, {prompt}};
    scc.fallback_to_single_stage = true;
    return request_synopsis(prompt, scc);
}

void write_synopsis_json(const Synopsis& syn, const fs::path& path) {
    json j;
    j["original_prompt"] = syn.original_prompt;
    j["stages"] = syn.stages;
    std::ofstream out(path, std::ios::trunc);
    out << j.dump(2) << "\n";
}

std::string dump_name(int level, int t) {
    return "level" + std::to_string(level) + "_t" + std::to_string(t) + ".vstr";
}

/// Shared tail of sample/nurse: runs the sampler and writes video.vstr,
/// PPM frames, attention dumps and metrics.csv.
void run_sampling_to_dir(const ToyDenoiser& model, const FrameConditioningSchedule& schedule,
                         const SampleOptions& opts, RunContext& rc) {
    auto res = sample(model, schedule, opts);
    const fs::path& out = rc.out_dir();

    tensor_write(res.video.data, out / "video.vstr");
    write_video_ppm(res.video, out / "frames");
    fs::create_directories(out / "attention");
    for (const auto& [key, m] : res.attention)
        matrix_write(m, out / "attention" / dump_name(key.first, key.second));

    // mean attention map per level over timesteps, for the headline metrics
    const int top = model.config().top_level();
    Matrix mean_top;
    int count = 0;
    for (const auto& [key, m] : res.attention)
        if (key.first == top) {
            if (count == 0)
                mean_top = m;
            else
                for (std::size_t i = 0; i < m.numel(); ++i) mean_top.data()[i] += m.data()[i];
            ++count;
        }
    CsvWriter csv(out / "metrics.csv",
                  {"frames", "steps", "seed", "dynamics_score", "band_k1_top", "band_k2_top"});
    std::string b1 = "", b2 = "";
    if (count > 0) {
        for (double& v : mean_top.values()) v /= count;
        TemporalAttentionMap map{top, -1, -1, std::move(mean_top)};
        b1 = num(band_energy_ratio(map, std::min<std::size_t>(1, opts.n_frames - 1)));
        b2 = num(band_energy_ratio(map, std::min<std::size_t>(2, opts.n_frames - 1)));
        write_pgm_heatmap(map.values, out / "attention_top_mean.pgm");
    }
    csv.row({std::to_string(opts.n_frames), std::to_string(opts.steps), std::to_string(opts.seed),
             opts.n_frames >= 2 ? num(dynamics_score(res.video)) : "", b1, b2});
}

struct SamplingArgs {
    std::size_t frames;
    int steps;
    std::uint64_t seed;
};

SamplingArgs sampling_args(const json& cfg) {
    SamplingArgs a;
    a.frames = cfg.value("frames", 16u);
    a.steps = cfg.value("steps", 50);
    a.seed = cfg.value("seed", 0ull);
    if (a.frames < 1) throw UsageError("--frames must be >= 1");
    if (a.steps < 1) throw UsageError("--steps must be >= 1");
    return a;
}

}  // namespace

int run_generate_data(const json& cfg) {
    reject_unknown_keys(cfg, {"spec", "frames", "seed", "out", "size"});
    require_keys(cfg, {"out"});
    const std::size_t frames = cfg.value("frames", 16u);
    const std::size_t size = cfg.value("size", 16u);
    const std::uint64_t seed = cfg.value("seed", 0ull);

    std::vector<SyntheticVideoSpec> specs;
    if (cfg.contains("spec")) {
        std::ifstream in(cfg["spec"].get<std::string>());
        if (!in) throw UsageError("cannot open spec file " + cfg["spec"].get<std::string>());
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw UsageError(std::string("malformed spec JSON: ") + e.what());
        }
        specs = specs_from_json(j);
    } else {
        specs = default_dataset_specs();
    }

    RunContext rc("generate-data", cfg["out"].get<std::string>());
    json resolved = cfg;
    resolved["resolved_spec"] = specs_to_json(specs);
    rc.set_config(resolved);
    if (cfg.contains("spec")) rc.add_input("spec", cfg["spec"].get<std::string>());

    auto items = generate_dataset(specs, frames, seed, size, size);
    json index;
    index["videos"] = json::array();
    for (std::size_t i = 0; i < items.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "video_%03zu.vstr", i);
        tensor_write(items[i].video.data, rc.out_dir() / name);
        json e;
        e["file"] = name;
        e["caption"] = items[i].caption;
        e["motif"] = specs[i].motif;
        index["videos"].push_back(std::move(e));
    }
    std::ofstream out(rc.out_dir() / "index.json", std::ios::trunc);
    out << index.dump(2) << "\n";
    out.close();
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    std::printf("generated %zu videos (%zu frames, %zux%zu) in %s\n", items.size(), frames, size,
                size, rc.out_dir().string().c_str());
    return kExitOk;
}

int run_train(const json& cfg) {
    reject_unknown_keys(cfg, {"data", "out", "train_steps", "seed", "lr", "min_timestep",
                              "channels", "heads", "pe", "temporal_conv", "diffusion_steps"});
    require_keys(cfg, {"data", "out"});

    auto ds = load_dataset_dir(cfg["data"].get<std::string>());

    ModelConfig mc;
    mc.height = ds.height;
    mc.width = ds.width;
    mc.n_train_frames = ds.items[0].video.frames();
    if (cfg.contains("channels")) mc.channels = cfg["channels"].get<std::vector<std::size_t>>();
    if (cfg.contains("heads")) mc.heads = cfg["heads"].get<int>();
    if (cfg.contains("diffusion_steps")) mc.diffusion_steps = cfg["diffusion_steps"].get<int>();
    if (cfg.contains("temporal_conv")) mc.temporal_conv = cfg["temporal_conv"].get<bool>();
    if (cfg.contains("pe")) {
        std::string pe = cfg["pe"].get<std::string>();
        if (pe == "none")
            mc.pe = PositionalEncodingVariant::none;
        else if (pe == "absolute_sinusoidal")
            mc.pe = PositionalEncodingVariant::absolute_sinusoidal;
        else if (pe == "rotary_relative")
            mc.pe = PositionalEncodingVariant::rotary_relative;
        else
            throw UsageError("unknown pe variant " + pe);
    }
    mc.validate();

    TrainConfig tc;
    tc.steps = cfg.value("train_steps", 600);
    tc.learning_rate = cfg.value("lr", 2e-3);
    tc.seed = cfg.value("seed", 0ull);
    tc.min_timestep = cfg.value("min_timestep", 20);

    RunContext rc("train", cfg["out"].get<std::string>());
    rc.set_config(cfg);
    rc.add_input("data", cfg["data"].get<std::string>());

    auto model = train(ds.items, mc, tc);
    model.save(rc.out_dir());
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    std::printf("trained %d steps, final loss %.6f, checkpoint in %s\n", tc.steps,
                model.meta.final_loss, rc.out_dir().string().c_str());
    return kExitOk;
}

int run_sample(const json& cfg) {
    reject_unknown_keys(cfg, {"checkpoint", "prompt", "frames", "steps", "seed", "out", "sigma",
                              "replace", "temporal_conv"});
    require_keys(cfg, {"checkpoint", "out", "prompt"});
    auto model = ToyDenoiser::load(cfg["checkpoint"].get<std::string>());
    auto args = sampling_args(cfg);

    RunContext rc("sample", cfg["out"].get<std::string>());
    rc.set_config(cfg);
    rc.add_input("checkpoint", cfg["checkpoint"].get<std::string>());

    Matrix cond = model.caption_schedule(cfg["prompt"].get<std::string>(), args.frames);
    FrameConditioningSchedule sched;
    sched.embeddings = std::move(cond);

    SampleOptions opts;
    opts.n_frames = args.frames;
    opts.steps = args.steps;
    opts.seed = args.seed;
    opts.capture = true;
    opts.temporal_conv = cfg.value("temporal_conv", true);
    opts.hooks = hooks_from_config(cfg, model.config(), args.frames);
    run_sampling_to_dir(model, sched, opts, rc);
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    return kExitOk;
}

int run_nurse(const json& cfg) {
    reject_unknown_keys(cfg, {"checkpoint", "prompt", "synopsis_file", "frames", "steps", "seed",
                              "out", "sigma", "replace", "no_tar", "temporal_conv"});
    require_keys(cfg, {"checkpoint", "out"});
    auto model = ToyDenoiser::load(cfg["checkpoint"].get<std::string>());
    auto args = sampling_args(cfg);

    json resolved = cfg;
    // TAR default: sigma 1 at the top level
    if (!resolved.contains("sigma") && !resolved.value("no_tar", false))
        resolved["sigma"] = {{"top", 1.0}};

    RunContext rc("nurse", cfg["out"].get<std::string>());
    rc.add_input("checkpoint", cfg["checkpoint"].get<std::string>());
    if (cfg.contains("synopsis_file"))
        rc.add_input("synopsis", cfg["synopsis_file"].get<std::string>());

    Synopsis syn = resolve_synopsis(cfg);
    if (syn.stages.size() > args.frames)
        throw UsageError("synopsis has more stages than frames");
    write_synopsis_json(syn, rc.out_dir() / "synopsis.json");
    resolved["resolved_stages"] = syn.stages;
    rc.set_config(resolved);

    Matrix stage_embeddings = encode_stages(syn, model.text_encoder());
    auto sched = build_schedule(stage_embeddings, args.frames);

    SampleOptions opts;
    opts.n_frames = args.frames;
    opts.steps = args.steps;
    opts.seed = args.seed;
    opts.capture = true;
    opts.temporal_conv = cfg.value("temporal_conv", true);
    opts.hooks = hooks_from_config(resolved, model.config(), args.frames);
    run_sampling_to_dir(model, sched, opts, rc);
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    return kExitOk;
}

int run_ablate(const json& cfg) {
    reject_unknown_keys(cfg, {"checkpoint", "out", "grid", "sigmas", "levels", "frames", "steps",
                              "seed", "prompts"});
    require_keys(cfg, {"checkpoint", "out"});
    auto model = ToyDenoiser::load(cfg["checkpoint"].get<std::string>());
    auto args = sampling_args(cfg);
    const std::string grid = cfg.value("grid", std::string("sigma"));
    if (grid != "sigma" && grid != "replace") throw UsageError("--grid must be sigma or replace");

    std::vector<std::string> prompts =
        cfg.contains("prompts") ? cfg["prompts"].get<std::vector<std::string>>()
                                : std::vector<std::string>{
                                      "red fades into blue",
                                      "a bright disk grows larger",
                                      "a smooth gradient drifts sideways",
                                      "horizontal stripes become vertical stripes",
                                      "a tiny disk slowly grows fully large",
                                  };
    std::vector<double> sigmas = cfg.contains("sigmas")
                                     ? cfg["sigmas"].get<std::vector<double>>()
                                     : std::vector<double>{8.0, 4.0, 1.0};
    std::vector<std::string> levels = cfg.contains("levels")
                                          ? cfg["levels"].get<std::vector<std::string>>()
                                          : std::vector<std::string>{"top"};
    if (prompts.empty() || (grid == "sigma" && sigmas.empty()) || levels.empty())
        throw UsageError("ablation grid is empty");

    struct Cell {
        std::string name;
        std::vector<AttentionHook> hooks;
    };
    std::vector<Cell> cells;
    cells.push_back({"baseline", {}});
    for (const auto& level_name : levels) {
        int lvl = resolve_level(level_name, model.config());
        if (grid == "sigma") {
            for (double s : sigmas)
                cells.push_back({"sigma_" + level_name + "_" + num(s),
                                 {AttentionHook::regularize(
                                     build_gaussian_toeplitz(args.frames, s), {lvl})}});
        } else {
            for (auto kind : {ExtremeKind::identity, ExtremeKind::uniform})
                cells.push_back(
                    {std::string("replace_") + (kind == ExtremeKind::identity ? "identity" : "uniform") +
                         "_" + level_name,
                     {AttentionHook::replace(extreme_matrix(args.frames, kind), {lvl})}});
        }
    }

    RunContext rc("ablate", cfg["out"].get<std::string>());
    rc.set_config(cfg);
    rc.add_input("checkpoint", cfg["checkpoint"].get<std::string>());

    const int top = model.config().top_level();
    CsvWriter rows(rc.out_dir() / "report.csv",
                   {"cell", "prompt_index", "seed", "dynamics_score", "band_k1_top", "band_k2_top"});
    CsvWriter means(rc.out_dir() / "means.csv", {"cell", "mean_dynamics_score", "mean_band_k2_top"});
    for (const auto& cell : cells) {
        if (!cell.hooks.empty() && cell.hooks[0].matrix) {
            matrix_write(cell.hooks[0].matrix->values, rc.out_dir() / ("delta_" + cell.name + ".vstr"));
            write_pgm_heatmap(cell.hooks[0].matrix->values,
                              rc.out_dir() / ("delta_" + cell.name + ".pgm"));
        }
        double mean_ds = 0.0, mean_b2 = 0.0;
        Matrix heat;
        int heat_n = 0;
        for (std::size_t p = 0; p < prompts.size(); ++p) {
            const std::uint64_t seed = args.seed + 100 * (p + 1);
            Matrix cond = model.caption_schedule(prompts[p], args.frames);
            FrameConditioningSchedule sched;
            sched.embeddings = std::move(cond);
            SampleOptions opts;
            opts.n_frames = args.frames;
            opts.steps = args.steps;
            opts.seed = seed;
            opts.capture = true;
            opts.hooks = cell.hooks;
            auto res = sample(model, sched, opts);

            Matrix mean_top;
            int count = 0;
            for (const auto& [key, m] : res.attention)
                if (key.first == top) {
                    if (count == 0)
                        mean_top = m;
                    else
                        for (std::size_t i = 0; i < m.numel(); ++i)
                            mean_top.data()[i] += m.data()[i];
                    ++count;
                }
            for (double& v : mean_top.values()) v /= count;
            TemporalAttentionMap map{top, -1, -1, mean_top};
            const double ds = dynamics_score(res.video);
            const double b1 = band_energy_ratio(map, 1);
            const double b2 = band_energy_ratio(map, std::min<std::size_t>(2, args.frames - 1));
            rows.row({cell.name, std::to_string(p), std::to_string(seed), num(ds), num(b1), num(b2)});
            mean_ds += ds / static_cast<double>(prompts.size());
            mean_b2 += b2 / static_cast<double>(prompts.size());
            if (heat_n == 0)
                heat = mean_top;
            else
                for (std::size_t i = 0; i < mean_top.numel(); ++i)
                    heat.data()[i] += mean_top.data()[i];
            ++heat_n;
        }
        for (double& v : heat.values()) v /= heat_n;
        write_pgm_heatmap(heat, rc.out_dir() / ("attention_" + cell.name + ".pgm"));
        means.row({cell.name, num(mean_ds), num(mean_b2)});
    }
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    return kExitOk;
}

int run_extract(const json& cfg) {
    reject_unknown_keys(cfg, {"checkpoint", "data", "out", "t_ref", "seed"});
    require_keys(cfg, {"checkpoint", "data", "out"});
    auto model = ToyDenoiser::load(cfg["checkpoint"].get<std::string>());
    auto ds = load_dataset_dir(cfg["data"].get<std::string>());
    std::vector<int> t_set = cfg.contains("t_ref")
                                 ? cfg["t_ref"].get<std::vector<int>>()
                                 : default_extraction_timesteps(model.schedule());
    const std::uint64_t seed = cfg.value("seed", 0ull);

    RunContext rc("extract", cfg["out"].get<std::string>());
    rc.set_config(cfg);
    rc.add_input("checkpoint", cfg["checkpoint"].get<std::string>());
    rc.add_input("data", cfg["data"].get<std::string>());

    for (std::size_t v = 0; v < ds.items.size(); ++v) {
        char sub[32];
        std::snprintf(sub, sizeof(sub), "video_%03zu", v);
        fs::create_directories(rc.out_dir() / sub);
        Matrix cond = model.caption_schedule(ds.items[v].caption, ds.items[v].video.frames());
        auto per_t = extract_attention_per_t(model, ds.items[v].video, cond, t_set, seed + v);
        for (const auto& [key, m] : per_t)
            matrix_write(m, rc.out_dir() / sub / dump_name(key.first, key.second));
    }
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    std::printf("extracted attention for %zu videos at %zu timesteps\n", ds.items.size(),
                t_set.size());
    return kExitOk;
}

int run_analyze(const json& cfg) {
    reject_unknown_keys(cfg, {"attention", "video", "out", "intervals", "bins", "feature", "seed"});
    require_keys(cfg, {"out"});
    const bool has_attn = cfg.contains("attention") && !cfg["attention"].empty();
    const bool has_video = cfg.contains("video") && !cfg["video"].empty();
    if (!has_attn && !has_video) throw UsageError("need at least one --attention or --video input");

    FeatureMode mode = FeatureMode::pixel_cosine;
    if (cfg.value("feature", std::string("pixel")) == "projection")
        mode = FeatureMode::random_projection_cosine;
    std::vector<int> intervals = cfg.contains("intervals")
                                     ? cfg["intervals"].get<std::vector<int>>()
                                     : std::vector<int>{1, 2, 4, 8, 16};
    const std::size_t bins = cfg.value("bins", 16u);

    RunContext rc("analyze", cfg["out"].get<std::string>());
    rc.set_config(cfg);

    auto parse_labeled = [](const json& arr) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& e : arr) {
            std::string s = e.get<std::string>();
            auto eq = s.find('=');
            if (eq == std::string::npos)
                out.emplace_back(fs::path(s).filename().string(), s);
            else
                out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        return out;
    };

    if (has_attn) {
        CsvWriter profiles(rc.out_dir() / "band_profiles.csv",
                           {"label", "file", "offset", "mean_mass"});
        CsvWriter energies(rc.out_dir() / "band_energy.csv",
                           {"label", "file", "band_k1", "band_k2"});
        for (const auto& [label, dir] : parse_labeled(cfg["attention"])) {
            rc.add_input("attention:" + label, dir);
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(dir))
                if (e.path().extension() == ".vstr") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            if (files.empty()) throw std::runtime_error("no attention dumps in " + dir);
            for (const auto& f : files) {
                Matrix m = matrix_read(f);
                TemporalAttentionMap map{0, -1, -1, std::move(m)};
                auto prof = band_profile(map);
                for (std::size_t off = 0; off < prof.mass.size(); ++off)
                    profiles.row({label, f.filename().string(), std::to_string(off),
                                  num(prof.mass[off])});
                energies.row({label, f.filename().string(), num(band_energy_ratio(map, 1)),
                              num(band_energy_ratio(
                                  map, std::min<std::size_t>(2, map.values.rows() - 1)))});
                write_pgm_heatmap(map.values,
                                  rc.out_dir() / ("attn_" + label + "_" + f.stem().string() + ".pgm"));
            }
        }
    }

    if (has_video) {
        CsvWriter dyn(rc.out_dir() / "dynamics.csv", {"label", "file", "dynamics_score"});
        CsvWriter hist(rc.out_dir() / "interval_histograms.csv",
                       {"label", "interval", "bin_left", "bin_right", "count"});
        for (const auto& [label, dir] : parse_labeled(cfg["video"])) {
            rc.add_input("video:" + label, dir);
            std::vector<fs::path> files;
            if (fs::is_directory(dir)) {
                for (const auto& e : fs::directory_iterator(dir))
                    if (e.path().extension() == ".vstr" && e.path().filename() != "video.vstr")
                        files.push_back(e.path());
                if (fs::exists(fs::path(dir) / "video.vstr"))
                    files.push_back(fs::path(dir) / "video.vstr");
            } else {
                files.push_back(dir);
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) throw std::runtime_error("no videos in " + dir);
            std::vector<ToyLatentVideo> videos;
            for (const auto& f : files) {
                videos.emplace_back(tensor_read(f));
                dyn.row({label, f.filename().string(), num(dynamics_score(videos.back()))});
                auto sim = similarity_matrix(videos.back(), mode);
                write_pgm_heatmap(sim.values,
                                  rc.out_dir() / ("sim_" + label + "_" + f.stem().string() + ".pgm"));
            }
            std::size_t min_len = videos[0].frames();
            for (const auto& v : videos) min_len = std::min(min_len, v.frames());
            std::vector<int> usable;
            for (int d : intervals)
                if (d > 0 && static_cast<std::size_t>(d) < min_len) usable.push_back(d);
            if (!usable.empty()) {
                auto hists = interval_similarity_histogram(videos, usable, bins, mode);
                for (const auto& h : hists)
                    for (std::size_t b = 0; b < bins; ++b)
                        hist.row({label, std::to_string(h.interval), num(h.bin_left[b]),
                                  num(h.bin_right[b]), std::to_string(h.counts[b])});
            }
        }
    }
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    return kExitOk;
}

int run_noise_opt(const json& cfg) {
    reject_unknown_keys(cfg, {"checkpoint", "reference", "caption", "out", "lambda", "opt_steps",
                              "step_size", "frames", "sample_steps", "level", "t_ref", "seed",
                              "fd_step", "steps"});
    require_keys(cfg, {"checkpoint", "reference", "out"});
    auto model = ToyDenoiser::load(cfg["checkpoint"].get<std::string>());

    Tensor ref_tensor = tensor_read(cfg["reference"].get<std::string>());
    ToyLatentVideo reference(std::move(ref_tensor));

    NoiseOptProblem prob;
    prob.model = &model;
    prob.config.lambda = cfg.value("lambda", 1.0);
    prob.config.steps = cfg.value("opt_steps", 30);
    prob.config.step_size = cfg.value("step_size", 0.05);
    prob.config.sample_steps = cfg.value("sample_steps", 4);
    prob.config.n_frames = cfg.value("frames", 8u);
    prob.config.fd_step = cfg.value("fd_step", 1e-3);
    prob.seed = cfg.value("seed", 0ull);
    if (cfg.contains("t_ref")) prob.config.t_ref = cfg["t_ref"].get<std::vector<int>>();
    prob.config.level = cfg.contains("level")
                            ? resolve_level(cfg["level"].get<std::string>(), model.config())
                            : model.config().top_level();

    if (reference.frames() < prob.config.n_frames)
        throw UsageError("reference video has fewer frames than --frames");
    if (reference.frames() > prob.config.n_frames) {
        Tensor trimmed({prob.config.n_frames, reference.channels(), reference.height(),
                        reference.width()});
        std::copy(reference.data.data(), reference.data.data() + trimmed.numel(), trimmed.data());
        reference = ToyLatentVideo(std::move(trimmed));
    }

    const std::string caption = cfg.value("caption", std::string("a scene changes over time"));
    prob.cond = model.caption_schedule(caption, prob.config.n_frames);

    auto t_ref = prob.resolved_t_ref();
    auto per_t = extract_attention_per_t(model, reference, prob.cond, t_ref, prob.seed);
    for (int t : t_ref) prob.reference_maps.push_back(per_t.at({prob.config.level, t}));

    RunContext rc("noise-opt", cfg["out"].get<std::string>());
    rc.set_config(cfg);
    rc.add_input("checkpoint", cfg["checkpoint"].get<std::string>());
    rc.add_input("reference", cfg["reference"].get<std::string>());

    auto res = optimize_initial_noise(prob);

    CsvWriter trace(rc.out_dir() / "trace.csv",
                    {"step", "l_attn", "l_kl", "l_joint", "beta", "gamma", "mu"});
    for (const auto& row : res.trace)
        trace.row({std::to_string(row.step), num(row.l_attn), num(row.l_kl), num(row.l_joint),
                   num(row.beta), num(row.gamma), num(row.mu)});

    json pj;
    pj["mu"] = res.params.mu;
    pj["beta"] = res.params.beta;
    pj["gamma"] = res.params.gamma;
    pj["improved"] = res.improved;
    pj["joint_loss_initial"] = res.trace.front().l_joint;
    pj["joint_loss_final"] = res.trace.back().l_joint;
    {
        std::ofstream out(rc.out_dir() / "params.json", std::ios::trunc);
        out << pj.dump(2) << "\n";
    }

    // before/after comparison with the same white noise
    FrameConditioningSchedule sched;
    sched.embeddings = prob.cond;
    for (const char* phase : {"before", "after"}) {
        SampleOptions opts;
        opts.n_frames = prob.config.n_frames;
        opts.steps = cfg.value("steps", 50);
        opts.initial_noise = prob.make_initial_noise(
            std::string(phase) == "before" ? NoiseDistributionParams{} : res.params);
        auto out_video = sample(model, sched, opts);
        write_video_ppm(out_video.video, rc.out_dir() / (std::string("frames_") + phase));
        tensor_write(out_video.video.data, rc.out_dir() / (std::string("video_") + phase + ".vstr"));
    }
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    return kExitOk;
}

int run_synopsis(const json& cfg) {
    reject_unknown_keys(cfg, {"prompt", "synopsis_file", "out", "seed"});
    require_keys(cfg, {"out"});
    Synopsis syn = resolve_synopsis(cfg);
    RunContext rc("synopsis", cfg["out"].get<std::string>());
    rc.set_config(cfg);
    if (cfg.contains("synopsis_file"))
        rc.add_input("synopsis", cfg["synopsis_file"].get<std::string>());
    write_synopsis_json(syn, rc.out_dir() / "synopsis.json");
    rc.add_outputs_under(rc.out_dir());
    rc.write();
    for (std::size_t i = 0; i < syn.stages.size(); ++i)
        std::printf("%zu. %s\n", i + 1, syn.stages[i].c_str());
    return kExitOk;
}

int run_replay(const json& cfg) {
    reject_unknown_keys(cfg, {"manifest", "out", "seed"});
    require_keys(cfg, {"manifest", "out"});
    std::ifstream in(cfg["manifest"].get<std::string>());
    if (!in) throw UsageError("cannot open manifest " + cfg["manifest"].get<std::string>());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed manifest JSON: ") + e.what());
    }

    const std::string sub = manifest.at("subcommand").get<std::string>();
    if (sub == "replay") throw UsageError("refusing to replay a replay manifest");
    CommandFn fn = find_command(sub);
    if (!fn) throw UsageError("manifest names unknown subcommand " + sub);

    json rerun_cfg = manifest.at("config");
    // derived keys recorded for reproducibility but not accepted as input
    rerun_cfg.erase("resolved_spec");
    rerun_cfg.erase("resolved_stages");
    rerun_cfg["out"] = cfg["out"].get<std::string>();
    int rc = fn(rerun_cfg);
    if (rc != kExitOk) return rc;

    // byte-level comparison against the recorded output hashes
    std::size_t mismatches = 0;
    for (const auto& e : manifest.at("outputs")) {
        const std::string rel = e.at("path").get<std::string>();
        const fs::path replayed = fs::path(cfg["out"].get<std::string>()) / rel;
        if (!fs::exists(replayed)) {
            std::printf("MISSING %s\n", rel.c_str());
            ++mismatches;
            continue;
        }
        const std::string got = hash_hex(hash_file(replayed));
        if (got != e.at("hash").get<std::string>()) {
            std::printf("DIFF    %s\n", rel.c_str());
            ++mismatches;
        }
    }
    if (mismatches) {
        std::printf("replay: %zu output(s) differ\n", mismatches);
        return kExitRuntime;
    }
    std::printf("replay: all %zu outputs byte-identical\n", manifest.at("outputs").size());
    return kExitOk;
}

CommandFn find_command(const std::string& name) {
    if (name == "generate-data") return &run_generate_data;
    if (name == "train") return &run_train;
    if (name == "sample") return &run_sample;
    if (name == "nurse") return &run_nurse;
    if (name == "ablate") return &run_ablate;
    if (name == "extract") return &run_extract;
    if (name == "analyze") return &run_analyze;
    if (name == "noise-opt") return &run_noise_opt;
    if (name == "synopsis") return &run_synopsis;
    if (name == "replay") return &run_replay;
    return nullptr;
}

}  // namespace vstar::cli
