#include "cli.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qgcl/analysis.hpp"
#include "qgcl/checkpoint.hpp"
#include "qgcl/error.hpp"
#include "qgcl/features.hpp"
#include "qgcl/labeling.hpp"
#include "qgcl/synthetic.hpp"
#include "qgcl/training.hpp"
#include "run_manifest.hpp"

#ifndef QGCL_VERSION
#define QGCL_VERSION "0.0.0"
#endif

namespace qgcl::cli {

namespace fs = std::filesystem;

namespace {

// Options shared by the training-flavoured commands. Flags override values
// read from --config.
struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    std::optional<std::string> cell;
    std::optional<unsigned> threads;
    std::string checkpoint;
    std::string out;
};

void add_config_flags(CLI::App* c, CommonOptions& o, bool training) {
    c->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    c->add_option("--threads", o.threads, "worker threads")->check(CLI::Range(1u, 256u));
    if (training) {
        c->add_option("--seed", o.seed, "random seed");
        c->add_option("--steps", o.steps, "optimisation steps");
        c->add_option("--cell", o.cell, "recurrent cell")->check(CLI::IsMember({"quality_gated", "original"}));
    }
}

training::TrainingConfig resolve_config(const CommonOptions& o) {
    training::TrainingConfig c = o.config.empty() ? training::TrainingConfig{} : training::load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.steps) c.steps = *o.steps;
    if (o.cell) c.cell_kind = model::parse_cell_kind(*o.cell);
    if (o.threads) c.threads = *o.threads;
    c.validate();
    return c;
}

std::map<std::string, std::string> config_map(const training::TrainingConfig& c) {
    std::map<std::string, std::string> m;
    std::istringstream in(training::format_config(c));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return m;
}

LumaSequence load_luma(const std::string& data, const std::string& desc) {
    return read_sequence(data, desc.empty() ? default_descriptor_path(data) : fs::path(desc));
}

// Loads a checkpoint and works out the architecture it was trained with.
model::Params<float> load_model(const std::string& path, bool residual, model::ModelConfig& cfg) {
    auto p = load_checkpoint(path);
    cfg = model::config_from_params(p, residual);
    return p;
}

std::string fixed(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

training::RunHooks progress_hooks(const std::string& metric, const fs::path& ckpt) {
    training::RunHooks h;
    h.log = [metric](const training::LogRow& r) {
        std::cerr << "step " << r.step << " loss " << r.loss;
        if (r.metric) std::cerr << ' ' << metric << ' ' << *r.metric;
        std::cerr << '\n';
    };
    h.checkpoint = [ckpt](std::size_t, const model::Params<float>& p) { save_checkpoint(ckpt, p); };
    return h;
}

// Validation clips for joint training: a few fixed draws from the
// validation list, or from the training set when none is given.
std::vector<training::ValidationClip> validation_clips(std::span<const training::Video> videos,
                                                       const training::TrainingConfig& cfg, std::size_t count) {
    training::ClipSampler s(videos, cfg, cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<training::ValidationClip> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(training::validation_clip(s.next()));
    return out;
}

class Runner {
public:
    explicit Runner(std::vector<std::string> args) : args_(std::move(args)) {}

    int run() {
        CLI::App app{"Quality-gated ConvLSTM enhancement of compressed video luma"};
        app.set_version_flag("--version", QGCL_VERSION);
        app.require_subcommand(1);
        setup_extract(app);
        setup_label(app);
        setup_pretrain(app);
        setup_train(app);
        setup_enhance(app);
        setup_eval(app);
        setup_contrib(app);
        setup_stats(app);
        setup_synth(app);
        setup_replay(app);

        std::vector<std::string> rev(args_.rbegin(), args_.rend() - 1);
        try {
            app.parse(rev);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? kExitOk : kExitUsage;
        }
        manifest_.argv = args_;
        manifest_.working_directory = fs::current_path().string();
        manifest_.tool_version = QGCL_VERSION;
        manifest_.started = std::chrono::system_clock::now();
        try {
            action_();
        } catch (const CLI::ParseError& e) {
            // Option combinations rejected after parsing.
            std::cerr << usage_of_ << "\n" << e.what() << "\n";
            return kExitUsage;
        } catch (const std::exception& e) {
            std::cerr << "qgcl " << manifest_.subcommand << ": " << e.what() << "\n";
            return code_ == kExitOk ? kExitRuntime : code_;
        }
        if (!manifest_out_.empty()) {
            manifest_.finished = std::chrono::system_clock::now();
            write_manifest(manifest_path(manifest_out_), manifest_);
        }
        return code_;
    }

private:
    CLI::App* command(CLI::App& app, const std::string& name, const std::string& help) {
        return app.add_subcommand(name, help);
    }

    void finish(const fs::path& out) { manifest_out_ = out; }

    // ---- extract-features ----------------------------------------------------------
    void setup_extract(CLI::App& app) {
        auto* c = command(app, "extract-features", "38-value quality vector per frame");
        c->add_option("--video", video_, "compressed luma file")->required()->check(CLI::ExistingFile);
        c->add_option("--desc", desc_, "descriptor (default <video>.desc)")->check(CLI::ExistingFile);
        c->add_option("--meta", meta_, "per-frame qp/bits CSV")->required()->check(CLI::ExistingFile);
        c->add_option("--out", common_.out, "feature CSV")->required();
        add_config_flags(c, common_, false);
        action_for(c, [this] {
            LumaSequence seq = load_luma(video_, desc_);
            seq.meta = read_meta(meta_, seq.frame_count());
            const unsigned threads = common_.threads.value_or(1);
            features::write_csv(common_.out, features::extract(seq, threads));
            manifest_.threads = threads;
            manifest_.inputs = {{"video", video_}, {"meta", meta_}};
            manifest_.outputs = {{"features", common_.out}};
            finish(common_.out);
        });
    }

    // ---- label -----------------------------------------------------------------------
    void setup_label(CLI::App& app) {
        auto* c = command(app, "label", "peak-quality-frame labels from raw vs compressed PSNR");
        c->add_option("--raw", raw_, "raw luma file")->required()->check(CLI::ExistingFile);
        c->add_option("--compressed", video_, "compressed luma file")->required()->check(CLI::ExistingFile);
        c->add_option("--out", common_.out, "label CSV")->required();
        action_for(c, [this] {
            const auto raw = load_luma(raw_, "");
            const auto comp = load_luma(video_, "");
            const auto psnr = frame_psnr(raw, comp);
            write_label_csv(common_.out, psnr, detect_pqf(psnr));
            manifest_.inputs = {{"raw", raw_}, {"compressed", video_}};
            manifest_.outputs = {{"labels", common_.out}};
            finish(common_.out);
        });
    }

    // ---- pretrain -------------------------------------------------------------------
    void setup_pretrain(CLI::App& app) {
        auto* c = command(app, "pretrain", "train the gates generator on PQF labels");
        c->add_option("--dataset", dataset_, "dataset list CSV")->required()->check(CLI::ExistingFile);
        c->add_option("--held-out", held_out_, "dataset list scored for accuracy")->check(CLI::ExistingFile);
        c->add_option("--checkpoint", common_.checkpoint, "initial parameters")->check(CLI::ExistingFile);
        c->add_option("--out", common_.out, "output checkpoint")->required();
        c->add_option("--log", log_, "loss curve CSV (default <out>.log.csv)");
        add_config_flags(c, common_, true);
        action_for(c, [this] {
            auto cfg = resolve_config(common_);
            if (cfg.cell_kind == model::CellKind::original)
                throw CLI::ValidationError("--cell", "original cells have no gates generator to pretrain");
            cfg.stage = training::Stage::pretrain_gates;
            const auto mcfg = cfg.model_config();
            model::Params<float> init = common_.checkpoint.empty() ? model::init_params<float>(mcfg, cfg.seed)
                                                                   : load_checkpoint(common_.checkpoint);
            auto gate_sets = [&](const std::string& list) {
                std::vector<training::GateSequenceData> out;
                for (const auto& v : training::load_dataset(list, cfg.threads)) out.push_back(training::gate_data(v));
                return out;
            };
            const auto train = gate_sets(dataset_);
            const auto held = held_out_.empty() ? std::vector<training::GateSequenceData>{} : gate_sets(held_out_);
            const auto r = training::pretrain_gates(train, held, cfg, std::move(init),
                                                    progress_hooks("accuracy", common_.out));
            save_checkpoint(common_.out, r.params);
            const std::string log = log_.empty() ? common_.out + ".log.csv" : log_;
            training::write_log_csv(log, r.log, "accuracy");
            std::cout << "P " << r.P << "\naccuracy " << fixed(r.final_accuracy) << "\n";
            record_config(cfg);
            manifest_.inputs = {{"dataset", dataset_}};
            if (!held_out_.empty()) manifest_.inputs["held_out"] = held_out_;
            if (!common_.checkpoint.empty()) manifest_.inputs["checkpoint"] = common_.checkpoint;
            manifest_.outputs = {{"checkpoint", common_.out}, {"log", log}};
            finish(common_.out);
        });
    }

    // ---- train ------------------------------------------------------------------------
    void setup_train(CLI::App& app) {
        auto* c = command(app, "train", "joint training of all networks");
        c->add_option("--dataset", dataset_, "dataset list CSV")->required()->check(CLI::ExistingFile);
        c->add_option("--validation", held_out_, "dataset list for validation dPSNR")->check(CLI::ExistingFile);
        c->add_option("--val-clips", val_clips_, "validation clips drawn")->check(CLI::Range(1, 1000));
        c->add_option("--checkpoint", common_.checkpoint, "pretrained gates generator")->check(CLI::ExistingFile);
        c->add_option("--out", common_.out, "output checkpoint")->required();
        c->add_option("--log", log_, "loss curve CSV (default <out>.log.csv)");
        add_config_flags(c, common_, true);
        action_for(c, [this] {
            auto cfg = resolve_config(common_);
            cfg.stage = training::Stage::joint;
            const auto mcfg = cfg.model_config();
            model::Params<float> init = model::init_params<float>(mcfg, cfg.seed);
            if (!common_.checkpoint.empty()) {
                if (mcfg.cell_kind == model::CellKind::original)
                    throw CLI::ValidationError("--checkpoint", "original cells have no gates generator to initialise");
                const auto pre = load_checkpoint(common_.checkpoint);
                for (auto& [name, t] : init) {
                    if (name.rfind("gates.", 0) != 0) continue;
                    const auto it = pre.find(name);
                    if (it == pre.end()) throw ShapeError(common_.checkpoint + ": missing '" + name + "'");
                    if (it->second.shape() != t.shape())
                        throw ShapeError(common_.checkpoint + ": '" + name + "' has shape " +
                                         shape_str(it->second.shape()) + ", expected " + shape_str(t.shape()));
                    t = it->second;
                }
            }
            const auto videos = training::load_dataset(dataset_, cfg.threads);
            const auto val_videos = held_out_.empty() ? std::vector<training::Video>{}
                                                      : training::load_dataset(held_out_, cfg.threads);
            training::ClipSampler sampler(videos, cfg, cfg.seed);
            for (const auto& w : sampler.warnings()) std::cerr << "warning: " << w << "\n";
            const auto val = validation_clips(val_videos.empty() ? videos : val_videos, cfg, val_clips_);
            const auto r = training::joint_train(sampler, val, cfg, std::move(init),
                                                 progress_hooks("val_delta_psnr", common_.out));
            save_checkpoint(common_.out, r.params);
            const std::string log = log_.empty() ? common_.out + ".log.csv" : log_;
            training::write_log_csv(log, r.log, "val_delta_psnr");
            record_config(cfg);
            manifest_.inputs = {{"dataset", dataset_}};
            if (!held_out_.empty()) manifest_.inputs["validation"] = held_out_;
            if (!common_.checkpoint.empty()) manifest_.inputs["checkpoint"] = common_.checkpoint;
            manifest_.outputs = {{"checkpoint", common_.out}, {"log", log}};
            finish(common_.out);
            std::cout << "initial_loss " << r.initial_loss << "\nfinal_loss " << r.final_loss << "\n";
            if (r.halted) {
                code_ = kExitRuntime;
                std::cerr << "qgcl train: halted: " << r.halt_reason << "; kept parameters from step "
                          << r.steps_done << "\n";
            }
        });
    }

    // ---- enhance ------------------------------------------------------------------------
    void setup_enhance(CLI::App& app) {
        auto* c = command(app, "enhance", "enhance a compressed luma sequence");
        c->add_option("--checkpoint", common_.checkpoint, "trained parameters")->required()->check(CLI::ExistingFile);
        c->add_option("--video", video_, "compressed luma file")->required()->check(CLI::ExistingFile);
        c->add_option("--desc", desc_, "descriptor (default <video>.desc)")->check(CLI::ExistingFile);
        c->add_option("--meta", meta_, "per-frame qp/bits CSV")->required()->check(CLI::ExistingFile);
        c->add_option("--out", common_.out, "enhanced luma file (descriptor written alongside)")->required();
        c->add_flag("--chunked", chunked_, "process in overlapping 40-frame chunks");
        c->add_flag("--residual", residual_, "the checkpoint was trained with the residual flag");
        add_config_flags(c, common_, false);
        action_for(c, [this] {
            model::ModelConfig mcfg;
            const auto params = load_model(common_.checkpoint, residual_from_config(), mcfg);
            LumaSequence seq = load_luma(video_, desc_);
            seq.meta = read_meta(meta_, seq.frame_count());
            const unsigned threads = common_.threads.value_or(1);
            const auto q = features::extract(seq, threads);
            const auto w = features::windows(q, mcfg.window_T);
            const auto clip = to_unit_clip<float>(seq, 0, seq.frame_count());
            std::optional<model::ChunkOptions> chunks;
            if (chunked_) chunks = model::ChunkOptions{};
            const auto out = model::enhance(params, mcfg, clip, std::span<const std::vector<double>>(w), chunks);
            const LumaSequence enhanced = from_unit_clip(out.frames);
            write_sequence(enhanced, common_.out, default_descriptor_path(common_.out));
            manifest_.threads = threads;
            manifest_.inputs = {{"checkpoint", common_.checkpoint}, {"video", video_}, {"meta", meta_}};
            manifest_.outputs = {{"video", common_.out}, {"descriptor", default_descriptor_path(common_.out).string()}};
            finish(common_.out);
        });
    }

    // ---- eval ---------------------------------------------------------------------------
    void setup_eval(CLI::App& app) {
        auto* c = command(app, "eval", "dPSNR report over a dataset list");
        c->add_option("--checkpoint", common_.checkpoint, "trained parameters")->required()->check(CLI::ExistingFile);
        c->add_option("--dataset", dataset_, "dataset list CSV")->required()->check(CLI::ExistingFile);
        c->add_option("--out", common_.out, "report directory")->required();
        c->add_option("--contrib", frames_, "frames whose contribution profile is written");
        c->add_flag("--chunked", chunked_, "process in overlapping 40-frame chunks");
        c->add_flag("--residual", residual_, "the checkpoint was trained with the residual flag");
        add_config_flags(c, common_, false);
        action_for(c, [this] {
            model::ModelConfig mcfg;
            const auto params = load_model(common_.checkpoint, residual_from_config(), mcfg);
            if (!frames_.empty() && mcfg.cell_kind == model::CellKind::original)
                throw CLI::ValidationError("--contrib", "contribution profiles need a quality-gated checkpoint");
            std::vector<analysis::TestPair> pairs;
            for (const auto& e : training::read_dataset_list(dataset_)) {
                auto p = training::load_pair(e);
                pairs.push_back({e.name, std::move(p.raw), std::move(p.compressed)});
            }
            analysis::EvalOptions opt;
            if (chunked_) opt.chunks = model::ChunkOptions{};
            opt.contribution_frames = frames_;
            opt.threads = common_.threads.value_or(1);
            const auto r = analysis::evaluate(params, mcfg, pairs, opt);

            const fs::path dir = common_.out;
            fs::create_directories(dir);
            manifest_.outputs.clear();
            analysis::write_summary_csv(dir / "summary.csv", r);
            manifest_.outputs["summary"] = (dir / "summary.csv").string();
            for (const auto& s : r.sequences) {
                const auto f = dir / (s.name + ".psnr.csv");
                analysis::write_frame_csv(f, s.psnr);
                manifest_.outputs[s.name + ".psnr"] = f.string();
                for (const auto& p : s.contributions) {
                    const auto g = dir / (s.name + ".contrib_" + std::to_string(p.target) + ".csv");
                    analysis::write_contribution_csv(g, p);
                    manifest_.outputs[s.name + ".contrib_" + std::to_string(p.target)] = g.string();
                }
            }
            const std::string report = model::param_report(r.params);
            std::ofstream(dir / "params.txt", std::ios::binary) << report;
            manifest_.outputs["params"] = (dir / "params.txt").string();
            if (r.mean_delta_psnr)
                std::cout << "mean_delta_psnr " << fixed(*r.mean_delta_psnr) << "\n";
            else
                std::cout << "mean_delta_psnr undefined\n";
            manifest_.threads = opt.threads;
            manifest_.inputs = {{"checkpoint", common_.checkpoint}, {"dataset", dataset_}};
            finish(dir);
        });
    }

    // ---- contrib -------------------------------------------------------------------------
    void setup_contrib(CLI::App& app) {
        auto* c = command(app, "contrib", "contribution of every frame to one target frame");
        c->add_option("--checkpoint", common_.checkpoint, "trained parameters")->required()->check(CLI::ExistingFile);
        c->add_option("--video", video_, "compressed luma file")->required()->check(CLI::ExistingFile);
        c->add_option("--desc", desc_, "descriptor (default <video>.desc)")->check(CLI::ExistingFile);
        c->add_option("--meta", meta_, "per-frame qp/bits CSV")->required()->check(CLI::ExistingFile);
        c->add_option("--frame", frame_, "target frame (zero-based)")->required();
        c->add_option("--out", common_.out, "contribution CSV")->required();
        add_config_flags(c, common_, false);
        action_for(c, [this] {
            model::ModelConfig mcfg;
            const auto params = load_model(common_.checkpoint, false, mcfg);
            if (mcfg.cell_kind == model::CellKind::original)
                throw CLI::ValidationError("--checkpoint", "contribution profiles need a quality-gated checkpoint");
            LumaSequence seq = load_luma(video_, desc_);
            seq.meta = read_meta(meta_, seq.frame_count());
            const unsigned threads = common_.threads.value_or(1);
            const auto q = features::extract(seq, threads);
            const auto w = features::windows(q, mcfg.window_T);
            model::GateSequence gates;
            {
                ad::NoGradGuard guard;
                const model::Bound<float> p(params, false);
                for (const auto& g : model::gates_forward(std::span<const std::vector<double>>(w), p, mcfg))
                    gates.logits.push_back(g.value().item());
            }
            analysis::write_contribution_csv(common_.out, analysis::contribution(gates, frame_));
            manifest_.threads = threads;
            manifest_.inputs = {{"checkpoint", common_.checkpoint}, {"video", video_}, {"meta", meta_}};
            manifest_.outputs = {{"contribution", common_.out}};
            finish(common_.out);
        });
    }

    // ---- stats --------------------------------------------------------------------------
    void setup_stats(CLI::App& app) {
        auto* c = command(app, "stats", "quality fluctuation and frame correlation of a pair");
        c->add_option("--raw", raw_, "raw luma file")->required()->check(CLI::ExistingFile);
        c->add_option("--compressed", video_, "compressed luma file")->required()->check(CLI::ExistingFile);
        c->add_option("--out", common_.out, "statistics CSV")->required();
        c->add_option("--pcc-distance", pcc_distance_, "also write mean PCC up to this distance");
        c->add_option("--pcc-out", pcc_out_, "PCC curve CSV (default <out>.pcc.csv)");
        action_for(c, [this] {
            const auto raw = load_luma(raw_, "");
            const auto comp = load_luma(video_, "");
            const auto s = analysis::quality_fluctuation_stats(frame_psnr(raw, comp));
            std::ostringstream o;
            o.precision(17);
            o << "metric,value\nstd," << s.std << "\npvd,";
            if (s.pvd) o << *s.pvd;
            o << "\npairs," << s.pairs << "\n";
            std::ofstream(common_.out, std::ios::binary) << o.str();
            manifest_.inputs = {{"raw", raw_}, {"compressed", video_}};
            manifest_.outputs = {{"stats", common_.out}};
            if (pcc_distance_ > 0) {
                const auto curve = analysis::pcc_curve(raw, pcc_distance_);
                const std::string path = pcc_out_.empty() ? common_.out + ".pcc.csv" : pcc_out_;
                std::ostringstream p;
                p.precision(17);
                p << "distance,pcc,pairs,skipped\n";
                for (std::size_t d = 0; d < curve.mean.size(); ++d) {
                    p << d + 1 << ',';
                    if (curve.mean[d]) p << *curve.mean[d];
                    p << ',' << curve.pairs[d] << ',' << curve.skipped[d] << '\n';
                }
                std::ofstream(path, std::ios::binary) << p.str();
                manifest_.outputs["pcc"] = path;
            }
            finish(common_.out);
        });
    }

    // ---- synth ----------------------------------------------------------------------------
    void setup_synth(CLI::App& app) {
        auto* c = command(app, "synth", "write a synthetic raw/compressed pair and a dataset list");
        c->add_option("--out", common_.out, "output directory")->required();
        c->add_option("--width", synth_.width, "frame width")->check(CLI::Range(8, 4096));
        c->add_option("--height", synth_.height, "frame height")->check(CLI::Range(8, 4096));
        c->add_option("--frames", synth_.frames, "frame count")->check(CLI::Range(1, 100000));
        c->add_option("--period", synth_.period, "quality period")->check(CLI::Range(1, 64));
        c->add_option("--seed", synth_seed_, "random seed");
        c->add_option("--name", synth_name_, "sequence name");
        action_for(c, [this] {
            synth_.seed = synth_seed_;
            const auto pair = synthetic::make_pair(synth_);
            const fs::path dir = common_.out;
            fs::create_directories(dir);
            const auto raw = dir / (synth_name_ + ".raw.y");
            const auto comp = dir / (synth_name_ + ".comp.y");
            const auto meta = dir / (synth_name_ + ".comp.csv");
            write_sequence(pair.raw, raw, default_descriptor_path(raw));
            write_sequence(pair.compressed, comp, default_descriptor_path(comp));
            write_meta(meta, *pair.compressed.meta);
            const auto list = dir / "list.csv";
            std::ofstream(list, std::ios::binary) << "name,raw,compressed,meta\n"
                                                   << synth_name_ << "," << raw.filename().string() << ","
                                                   << comp.filename().string() << "," << meta.filename().string()
                                                   << "\n";
            manifest_.seed = synth_seed_;
            manifest_.outputs = {{"raw", raw.string()}, {"compressed", comp.string()}, {"meta", meta.string()},
                                 {"list", list.string()}};
            finish(dir);
        });
    }

    // ---- replay ---------------------------------------------------------------------------
    void setup_replay(CLI::App& app) {
        auto* c = command(app, "replay", "rerun the invocation recorded in a manifest");
        c->add_option("manifest", replay_, "manifest JSON")->required()->check(CLI::ExistingFile);
        action_for(c, [this] {
            const auto m = read_manifest(replay_);
            if (m.argv.size() < 2 || m.argv[1] == "replay") throw FormatError(replay_ + ": nothing to replay");
            if (!m.working_directory.empty()) fs::current_path(m.working_directory);
            code_ = Runner(m.argv).run();
        });
    }

    void action_for(CLI::App* c, std::function<void()> f) {
        c->callback([this, c, f] {
            manifest_.subcommand = c->get_name();
            usage_of_ = c->help();
            action_ = f;
        });
    }

    bool residual_from_config() const {
        if (residual_) return true;
        if (common_.config.empty()) return false;
        return training::load_config(common_.config).residual;
    }

    void record_config(const training::TrainingConfig& cfg) {
        manifest_.config = config_map(cfg);
        manifest_.seed = cfg.seed;
        manifest_.threads = cfg.threads;
    }

    std::vector<std::string> args_;
    RunManifest manifest_;
    fs::path manifest_out_;
    std::function<void()> action_ = [] {};
    std::string usage_of_;
    int code_ = kExitOk;

    CommonOptions common_;
    std::string video_, desc_, meta_, raw_, dataset_, held_out_, log_, replay_, pcc_out_;
    std::vector<std::size_t> frames_;
    std::size_t frame_ = 0, pcc_distance_ = 0, val_clips_ = 4;
    bool chunked_ = false, residual_ = false;
    synthetic::PairOptions synth_;
    std::uint64_t synth_seed_ = 1;
    std::string synth_name_ = "synthetic";
};

}  // namespace

int run(const std::vector<std::string>& args) { return Runner(args).run(); }

}  // namespace qgcl::cli
