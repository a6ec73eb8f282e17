#include "qgcl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "fs_util.hpp"
#include "qgcl/error.hpp"
#include "text_util.hpp"

namespace qgcl::training {

namespace {

std::size_t parse_count(const std::string& v, const std::string& key) {
    const long long n = detail::parse_int(v, key);
    if (n < 0) throw FormatError(key + ": must be non-negative, got " + v);
    return static_cast<std::size_t>(n);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw FormatError(key + ": '" + v + "' is not a boolean");
}

Stage parse_stage(const std::string& v) {
    if (v == "pretrain_gates") return Stage::pretrain_gates;
    if (v == "joint") return Stage::joint;
    throw FormatError("stage: '" + v + "' is not one of pretrain_gates, joint");
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::vector<double>> slice_windows(const std::vector<std::vector<double>>& all, std::size_t start,
                                               std::size_t length) {
    return {all.begin() + static_cast<std::ptrdiff_t>(start),
            all.begin() + static_cast<std::ptrdiff_t>(start + length)};
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    // Unbiased draw from [0, n) independent of the library's distributions,
    // whose output is not specified across implementations.
    const std::uint64_t range = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t r;
    do r = rng(); while (r >= limit);
    return static_cast<std::size_t>(r % range);
}

model::Params<float> gates_subset(const model::Params<float>& all) {
    model::Params<float> out;
    for (const auto& [name, t] : all)
        if (name.rfind("gates.", 0) == 0) out.emplace(name, t);
    if (out.empty()) throw ShapeError("pretrain_gates: parameter set has no gates generator");
    return out;
}

std::vector<float> logits_values(const std::vector<ad::Var<float>>& logits) {
    std::vector<float> out;
    out.reserve(logits.size());
    for (const auto& g : logits) out.push_back(g.value().item());
    return out;
}

bool all_finite(const NamedTensors<float>& grads) {
    for (const auto& [name, g] : grads)
        for (float v : g.values())
            if (!std::isfinite(v)) return false;
    return true;
}

NamedTensors<float> member_gradient(const model::Params<float>& params, const model::ModelConfig& cfg,
                                    const TrainingSample& s, double& loss) {
    model::Bound<float> p(params, true);
    const auto clip = ad::constant(s.compressed);
    const auto raw = ad::constant(s.raw);
    const auto fwd = model::forward(clip, std::span<const std::vector<double>>(s.windows), p, cfg);
    const auto l = joint_loss(fwd.output, raw);
    loss = l.value().item();
    return ad::backward(l);
}

}  // namespace

std::string_view stage_name(Stage s) { return s == Stage::pretrain_gates ? "pretrain_gates" : "joint"; }

void TrainingConfig::validate() const {
    if (clip_length < 2) throw DomainError("clip_length must be at least 2, got " + std::to_string(clip_length));
    if (!(K > 1.0)) throw DomainError("K must exceed 1, got " + fmt_double(K));
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw DomainError("learning_rate must be positive, got " + fmt_double(learning_rate));
    if (crop == 0) throw DomainError("crop must be positive");
    if (batch == 0) throw DomainError("batch must be positive");
    if (T == 0) throw DomainError("T must be positive");
    if (!(clip_norm > 0.0)) throw DomainError("clip_norm must be positive, got " + fmt_double(clip_norm));
    if (threads == 0) throw DomainError("threads must be at least 1");
    model_config().validate();
}

model::ModelConfig TrainingConfig::model_config() const {
    model::ModelConfig m;
    m.window_T = T;
    m.lstm_hidden = lstm_hidden;
    m.cell_kind = cell_kind;
    m.residual = residual;
    return m;
}

void set_config_value(TrainingConfig& c, const std::string& key, const std::string& value) {
    if (key == "stage") c.stage = parse_stage(value);
    else if (key == "learning_rate") c.learning_rate = detail::parse_double(value, key);
    else if (key == "K") c.K = detail::parse_double(value, key);
    else if (key == "T") c.T = parse_count(value, key);
    else if (key == "clip_length") c.clip_length = parse_count(value, key);
    else if (key == "crop") c.crop = parse_count(value, key);
    else if (key == "batch") c.batch = parse_count(value, key);
    else if (key == "steps") c.steps = parse_count(value, key);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_count(value, key));
    else if (key == "cell_kind") {
        try {
            c.cell_kind = model::parse_cell_kind(value);
        } catch (const Error& e) {
            throw FormatError(std::string("cell_kind: ") + e.what());
        }
    } else if (key == "lstm_hidden") c.lstm_hidden = parse_count(value, key);
    else if (key == "residual") c.residual = parse_bool(value, key);
    else if (key == "clip_norm") c.clip_norm = detail::parse_double(value, key);
    else if (key == "checkpoint_every") c.checkpoint_every = parse_count(value, key);
    else if (key == "validate_every") c.validate_every = parse_count(value, key);
    else if (key == "log_every") c.log_every = parse_count(value, key);
    else if (key == "threads") c.threads = static_cast<unsigned>(parse_count(value, key));
    else throw FormatError("unknown config key '" + key + "'");
}

TrainingConfig parse_config(const std::string& text, const std::string& origin) {
    TrainingConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw FormatError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            set_config_value(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
        } catch (const FormatError& e) {
            throw FormatError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

TrainingConfig load_config(const std::filesystem::path& path) {
    return parse_config(detail::read_file(path), path.string());
}

std::string format_config(const TrainingConfig& c) {
    std::ostringstream o;
    o << "stage = " << stage_name(c.stage) << '\n'
      << "learning_rate = " << fmt_double(c.learning_rate) << '\n'
      << "K = " << fmt_double(c.K) << '\n'
      << "T = " << c.T << '\n'
      << "clip_length = " << c.clip_length << '\n'
      << "crop = " << c.crop << '\n'
      << "batch = " << c.batch << '\n'
      << "steps = " << c.steps << '\n'
      << "seed = " << c.seed << '\n'
      << "cell_kind = " << model::cell_kind_name(c.cell_kind) << '\n'
      << "lstm_hidden = " << c.lstm_hidden << '\n'
      << "residual = " << (c.residual ? "true" : "false") << '\n'
      << "clip_norm = " << fmt_double(c.clip_norm) << '\n'
      << "checkpoint_every = " << c.checkpoint_every << '\n'
      << "validate_every = " << c.validate_every << '\n'
      << "log_every = " << c.log_every << '\n'
      << "threads = " << c.threads << '\n';
    return o.str();
}

// ---- data -------------------------------------------------------------------

Video prepare_video(std::string name, LumaSequence raw, LumaSequence compressed, unsigned threads) {
    raw.validate();
    compressed.validate();
    if (raw.width != compressed.width || raw.height != compressed.height ||
        raw.frame_count() != compressed.frame_count())
        throw FormatError(name + ": raw is " + std::to_string(raw.width) + "x" + std::to_string(raw.height) + "x" +
                          std::to_string(raw.frame_count()) + " but compressed is " +
                          std::to_string(compressed.width) + "x" + std::to_string(compressed.height) + "x" +
                          std::to_string(compressed.frame_count()));
    if (!compressed.meta) throw FormatError(name + ": compressed sequence has no per-frame metadata");
    Video v;
    v.name = std::move(name);
    v.q = features::extract(compressed, threads);
    v.psnr = frame_psnr(raw, compressed);
    v.labels = detect_pqf(v.psnr).labels;
    v.raw = std::move(raw);
    v.compressed = std::move(compressed);
    return v;
}

std::vector<DatasetEntry> read_dataset_list(const std::filesystem::path& list_csv) {
    std::istringstream in(detail::read_file(list_csv));
    const auto base = list_csv.parent_path();
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "name,raw,compressed,meta")
        throw FormatError(list_csv.string() + ": expected header name,raw,compressed,meta");
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : base / path;
    };
    std::vector<DatasetEntry> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != 4)
            throw FormatError(list_csv.string() + ":" + std::to_string(lineno) + ": expected 4 columns, got " +
                              std::to_string(cells.size()));
        if (cells[0].empty()) throw FormatError(list_csv.string() + ":" + std::to_string(lineno) + ": empty name");
        out.push_back({cells[0], resolve(cells[1]), resolve(cells[2]), resolve(cells[3])});
    }
    if (out.empty()) throw FormatError(list_csv.string() + ": dataset lists no videos");
    return out;
}

LoadedPair load_pair(const DatasetEntry& e) {
    LoadedPair p;
    p.raw = read_sequence(e.raw, default_descriptor_path(e.raw));
    p.compressed = read_sequence(e.compressed, default_descriptor_path(e.compressed));
    p.compressed.meta = read_meta(e.meta, p.compressed.frame_count());
    return p;
}

std::vector<Video> load_dataset(const std::filesystem::path& list_csv, unsigned threads) {
    std::vector<Video> out;
    for (const auto& e : read_dataset_list(list_csv)) {
        auto p = load_pair(e);
        out.push_back(prepare_video(e.name, std::move(p.raw), std::move(p.compressed), threads));
    }
    return out;
}

ClipSampler::ClipSampler(std::span<const Video> videos, const TrainingConfig& cfg, std::uint64_t seed)
    : videos_(videos), length_(cfg.clip_length), crop_(cfg.crop), rng_(seed) {
    if (videos.empty()) throw DomainError("sample_clips: dataset is empty");
    windows_.resize(videos.size());
    for (std::size_t i = 0; i < videos.size(); ++i) {
        const Video& v = videos[i];
        if (v.compressed.frame_count() < length_) {
            warnings_.push_back(v.name + ": " + std::to_string(v.compressed.frame_count()) +
                                " frames, shorter than clip_length " + std::to_string(length_) + "; skipped");
            continue;
        }
        if (v.compressed.width < crop_ || v.compressed.height < crop_) {
            warnings_.push_back(v.name + ": frames are " + std::to_string(v.compressed.width) + "x" +
                                std::to_string(v.compressed.height) + ", smaller than crop " +
                                std::to_string(crop_) + "; skipped");
            continue;
        }
        windows_[i] = features::windows(v.q, cfg.T);
        eligible_.push_back(i);
    }
    if (eligible_.empty()) {
        std::string why;
        for (const auto& w : warnings_) why += "\n  " + w;
        throw DomainError("sample_clips: no video can supply a clip of " + std::to_string(length_) + " frames at " +
                          std::to_string(crop_) + "x" + std::to_string(crop_) + why);
    }
}

TrainingSample ClipSampler::next() {
    TrainingSample s;
    s.video = eligible_[uniform_index(rng_, eligible_.size())];
    const Video& v = videos_[s.video];
    s.start = uniform_index(rng_, v.compressed.frame_count() - length_ + 1);
    s.y = uniform_index(rng_, v.compressed.height - crop_ + 1);
    s.x = uniform_index(rng_, v.compressed.width - crop_ + 1);

    s.compressed = Tensor<float>(Shape{length_, 1, crop_, crop_});
    s.raw = Tensor<float>(Shape{length_, 1, crop_, crop_});
    for (std::size_t n = 0; n < length_; ++n) {
        const FrameView c = v.compressed.frame(s.start + n);
        const FrameView r = v.raw.frame(s.start + n);
        for (std::size_t y = 0; y < crop_; ++y)
            for (std::size_t x = 0; x < crop_; ++x) {
                s.compressed.at(n, 0, y, x) = static_cast<float>(c.at(s.y + y, s.x + x) / 255.0);
                s.raw.at(n, 0, y, x) = static_cast<float>(r.at(s.y + y, s.x + x) / 255.0);
            }
    }
    s.windows = slice_windows(windows_[s.video], s.start, length_);
    s.labels.assign(v.labels.begin() + static_cast<std::ptrdiff_t>(s.start),
                    v.labels.begin() + static_cast<std::ptrdiff_t>(s.start + length_));
    return s;
}

GateSequenceData gate_data(const Video& v) { return {v.q, v.labels}; }

GateClipSampler::GateClipSampler(std::span<const GateSequenceData> data, std::size_t clip_length, std::size_t T,
                                 std::uint64_t seed)
    : data_(data), length_(clip_length), rng_(seed) {
    windows_.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].q.size() != data[i].labels.size())
            throw ShapeError("gate data " + std::to_string(i) + ": " + std::to_string(data[i].q.size()) +
                             " feature rows but " + std::to_string(data[i].labels.size()) + " labels");
        if (data[i].q.size() < length_) continue;
        windows_[i] = features::windows(data[i].q, T);
        eligible_.push_back(i);
    }
    if (eligible_.empty())
        throw DomainError("pretrain_gates: no sequence has " + std::to_string(length_) + " frames");
}

GateClip GateClipSampler::next() {
    const std::size_t i = eligible_[uniform_index(rng_, eligible_.size())];
    const std::size_t start = uniform_index(rng_, data_[i].q.size() - length_ + 1);
    GateClip c;
    c.windows = slice_windows(windows_[i], start, length_);
    c.labels.assign(data_[i].labels.begin() + static_cast<std::ptrdiff_t>(start),
                    data_[i].labels.begin() + static_cast<std::ptrdiff_t>(start + length_));
    return c;
}

std::vector<GateClip> tile_gate_clips(std::span<const GateSequenceData> data, std::size_t clip_length,
                                      std::size_t T) {
    std::vector<GateClip> out;
    for (const auto& d : data) {
        const auto w = features::windows(d.q, T);
        for (std::size_t start = 0; start < d.q.size(); start += clip_length) {
            const std::size_t len = std::min(clip_length, d.q.size() - start);
            GateClip c;
            c.windows = slice_windows(w, start, len);
            c.labels.assign(d.labels.begin() + static_cast<std::ptrdiff_t>(start),
                            d.labels.begin() + static_cast<std::ptrdiff_t>(start + len));
            out.push_back(std::move(c));
        }
    }
    return out;
}

// ---- losses -------------------------------------------------------------------

template <class T>
ad::Var<T> gates_pretrain_loss(std::span<const ad::Var<T>> logits, std::span<const int> labels, double P, double K) {
    if (logits.size() != labels.size())
        throw ShapeError("gates_pretrain_loss: " + std::to_string(logits.size()) + " logits but " +
                         std::to_string(labels.size()) + " labels");
    if (logits.empty()) throw ShapeError("gates_pretrain_loss: no samples");
    if (!(K > 1.0)) throw DomainError("gates_pretrain_loss: K must exceed 1, got " + fmt_double(K));
    if (!(P > 0.0)) throw DomainError("gates_pretrain_loss: P must be positive, got " + fmt_double(P));
    for (int l : labels)
        if (l != 0 && l != 1) throw DomainError("gates_pretrain_loss: label " + std::to_string(l) + " is not 0 or 1");
    const auto z = ad::concat(logits);
    return ad::weighted_sigmoid_cross_entropy(z, labels, static_cast<T>(P), static_cast<T>(K));
}

template <class T>
ad::Var<T> joint_loss(const ad::Var<T>& enhanced, const ad::Var<T>& raw) {
    if (enhanced.shape() != raw.shape())
        throw ShapeError("joint_loss: enhanced " + shape_str(enhanced.shape()) + " vs raw " + shape_str(raw.shape()));
    // Every frame has the same pixel count, so the mean over frames of the
    // per-frame MSE is the MSE over the whole clip.
    return ad::mse(enhanced, raw);
}

template ad::Var<float> gates_pretrain_loss<float>(std::span<const ad::Var<float>>, std::span<const int>, double,
                                                   double);
template ad::Var<double> gates_pretrain_loss<double>(std::span<const ad::Var<double>>, std::span<const int>, double,
                                                     double);
template ad::Var<float> joint_loss<float>(const ad::Var<float>&, const ad::Var<float>&);
template ad::Var<double> joint_loss<double>(const ad::Var<double>&, const ad::Var<double>&);

// ---- pretraining ----------------------------------------------------------------

double gate_accuracy(const model::Params<float>& params, const model::ModelConfig& cfg,
                     std::span<const GateClip> clips) {
    ad::NoGradGuard guard;
    const model::Bound<float> p(params, false);
    std::size_t right = 0, total = 0;
    for (const auto& c : clips) {
        const auto logits = logits_values(model::gates_forward(std::span<const std::vector<double>>(c.windows), p, cfg));
        for (std::size_t n = 0; n < logits.size(); ++n) {
            // s(K G) > 0.5 exactly when G > 0, for any K > 0.
            right += ((logits[n] > 0.0f) == (c.labels[n] == 1));
            ++total;
        }
    }
    if (total == 0) throw DomainError("gate_accuracy: no frames to score");
    return static_cast<double>(right) / static_cast<double>(total);
}

PretrainResult pretrain_gates(std::span<const GateSequenceData> train, std::span<const GateSequenceData> held_out,
                              const TrainingConfig& cfg, model::Params<float> init, const RunHooks& hooks) {
    cfg.validate();
    const auto mcfg = cfg.model_config();
    if (mcfg.cell_kind != model::CellKind::quality_gated)
        throw DomainError("pretrain_gates: the original cell has no gates generator");
    model::validate_params(mcfg, init);

    std::vector<int> all_labels;
    for (const auto& d : train) all_labels.insert(all_labels.end(), d.labels.begin(), d.labels.end());
    const ClassWeight w = class_weight(all_labels);  // throws on zero positives
    const double P = w.degenerate ? 1.0 : w.P;

    GateClipSampler sampler(train, cfg.clip_length, cfg.T, cfg.seed);
    const auto eval_clips = tile_gate_clips(held_out.empty() ? train : held_out, cfg.clip_length, cfg.T);

    PretrainResult r;
    r.P = P;
    model::Params<float> gates = gates_subset(init);
    AdamState<float> adam;
    adam.hyper.learning_rate = cfg.learning_rate;

    auto emit = [&](std::size_t step, double loss) {
        for (const auto& [name, t] : gates) init.at(name) = t;
        LogRow row{step, loss, gate_accuracy(init, mcfg, eval_clips)};
        r.log.push_back(row);
        if (hooks.log) hooks.log(row);
    };

    auto clip_loss = [&](const GateClip& c, bool record, NamedTensors<float>* grads) {
        const model::Bound<float> p(gates, record);
        const auto logits = model::gates_forward(std::span<const std::vector<double>>(c.windows), p, mcfg);
        const auto loss = gates_pretrain_loss<float>(logits, c.labels, P, cfg.K);
        if (grads) *grads = ad::backward(loss);
        return static_cast<double>(loss.value().item());
    };
    auto is_log_step = [&](std::size_t s) { return s == 0 || (cfg.log_every && s % cfg.log_every == 0); };

    // A row for step s reports the parameters after s updates.
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        NamedTensors<float> grads;
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            NamedTensors<float> g;
            batch_loss += clip_loss(sampler.next(), true, &g);
            if (b == 0) {
                grads = std::move(g);
            } else {
                for (auto& [name, t] : g) {
                    auto& acc = grads.at(name);
                    for (std::size_t i = 0; i < t.numel(); ++i) acc[i] += t[i];
                }
            }
        }
        const float inv = 1.0f / static_cast<float>(cfg.batch);
        for (auto& [name, t] : grads)
            for (float& v : t.values()) v *= inv;
        batch_loss /= static_cast<double>(cfg.batch);
        if (!std::isfinite(batch_loss)) throw DomainError("pretrain_gates: non-finite loss at step " + std::to_string(step));
        if (is_log_step(step - 1)) emit(step - 1, batch_loss);
        adam_step(gates, grads, adam);
        if (hooks.checkpoint && cfg.checkpoint_every && step % cfg.checkpoint_every == 0) {
            for (const auto& [name, t] : gates) init.at(name) = t;
            hooks.checkpoint(step, init);
        }
    }
    if (cfg.steps > 0) {
        ad::NoGradGuard guard;
        double loss = 0.0;
        for (std::size_t b = 0; b < cfg.batch; ++b) loss += clip_loss(sampler.next(), false, nullptr);
        emit(cfg.steps, loss / static_cast<double>(cfg.batch));
    }
    for (const auto& [name, t] : gates) init.at(name) = t;
    r.final_accuracy = cfg.steps ? r.log.back().metric.value() : gate_accuracy(init, mcfg, eval_clips);
    r.params = std::move(init);
    return r;
}

// ---- joint training ----------------------------------------------------------------

ValidationClip validation_clip(const TrainingSample& s) { return {s.compressed, s.raw, s.windows}; }

std::optional<double> validation_delta_psnr(const model::Params<float>& params, const model::ModelConfig& cfg,
                                            std::span<const ValidationClip> clips) {
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& c : clips) {
        const auto out = model::enhance(params, cfg, c.compressed, std::span<const std::vector<double>>(c.windows));
        const auto report = delta_psnr(from_unit_clip(c.raw), from_unit_clip(c.compressed), from_unit_clip(out.frames));
        if (report.mean) {
            sum += *report.mean;
            ++used;
        }
    }
    if (used == 0) return std::nullopt;
    return sum / static_cast<double>(used);
}

BatchGradient joint_batch_gradient(const model::Params<float>& params, const model::ModelConfig& cfg,
                                   std::span<const TrainingSample> batch, unsigned threads) {
    if (batch.empty()) throw DomainError("joint_batch_gradient: empty batch");
    std::vector<NamedTensors<float>> grads(batch.size());
    std::vector<double> losses(batch.size(), 0.0);
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), batch.size());
    if (workers == 1) {
        for (std::size_t b = 0; b < batch.size(); ++b) grads[b] = member_gradient(params, cfg, batch[b], losses[b]);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t b = w; b < batch.size(); b += workers)
                        grads[b] = member_gradient(params, cfg, batch[b], losses[b]);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    BatchGradient out;
    out.grads = std::move(grads[0]);
    for (std::size_t b = 1; b < batch.size(); ++b)
        for (const auto& [name, t] : grads[b]) {
            auto& acc = out.grads.at(name);
            for (std::size_t i = 0; i < t.numel(); ++i) acc[i] += t[i];
        }
    const float inv = 1.0f / static_cast<float>(batch.size());
    for (auto& [name, t] : out.grads)
        for (float& v : t.values()) v *= inv;
    for (double l : losses) out.loss += l;
    out.loss /= static_cast<double>(batch.size());
    return out;
}

JointResult joint_train(ClipSampler& sampler, std::span<const ValidationClip> validation, const TrainingConfig& cfg,
                        model::Params<float> init, const RunHooks& hooks) {
    cfg.validate();
    const auto mcfg = cfg.model_config();
    model::validate_params(mcfg, init);

    JointResult r;
    model::Params<float> params = std::move(init);
    r.params = params;
    AdamState<float> adam;
    adam.hyper.learning_rate = cfg.learning_rate;
    std::vector<TrainingSample> first_batch;

    auto validate_now = [&]() -> std::optional<double> {
        if (validation.empty()) return std::nullopt;
        return validation_delta_psnr(params, mcfg, validation);
    };

    auto batch_loss = [&](std::span<const TrainingSample> batch) {
        ad::NoGradGuard guard;
        const model::Bound<float> p(params, false);
        double total = 0.0;
        for (const auto& s : batch) {
            const auto fwd = model::forward(ad::constant(s.compressed), std::span<const std::vector<double>>(s.windows),
                                            p, mcfg);
            total += joint_loss(fwd.output, ad::constant(s.raw)).value().item();
        }
        return total / static_cast<double>(batch.size());
    };
    auto emit = [&](std::size_t s, double loss, bool validate) {
        LogRow row{s, loss, validate ? validate_now() : std::nullopt};
        r.log.push_back(row);
        if (hooks.log) hooks.log(row);
    };
    auto is_val_step = [&](std::size_t s) { return s == 0 || (cfg.validate_every && s % cfg.validate_every == 0); };
    auto is_log_step = [&](std::size_t s) {
        return s == 0 || (cfg.log_every && s % cfg.log_every == 0) || is_val_step(s);
    };

    // A row for step s reports the parameters after s updates.
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        std::vector<TrainingSample> batch;
        for (std::size_t b = 0; b < cfg.batch; ++b) batch.push_back(sampler.next());
        BatchGradient g = joint_batch_gradient(params, mcfg, batch, cfg.threads);
        if (step == 1) {
            r.initial_loss = g.loss;
            first_batch = batch;
        }
        if (is_log_step(step - 1)) emit(step - 1, g.loss, is_val_step(step - 1));
        if (!std::isfinite(g.loss) || !all_finite(g.grads)) {
            r.halted = true;
            r.halt_reason = std::string("non-finite ") + (std::isfinite(g.loss) ? "gradient" : "loss") + " at step " +
                            std::to_string(step);
            break;
        }
        clip_global_norm(g.grads, cfg.clip_norm);
        adam_step(params, g.grads, adam);
        r.steps_done = step;
        r.params = params;
        if (hooks.checkpoint && ((cfg.checkpoint_every && step % cfg.checkpoint_every == 0) || step == cfg.steps))
            hooks.checkpoint(step, r.params);
    }
    if (!r.halted && cfg.steps > 0) {
        std::vector<TrainingSample> batch;
        for (std::size_t b = 0; b < cfg.batch; ++b) batch.push_back(sampler.next());
        emit(cfg.steps, batch_loss(batch), true);
    }

    if (!first_batch.empty()) {
        params = r.params;
        r.final_loss = batch_loss(first_batch);
    }
    return r;
}

void write_log_csv(const std::filesystem::path& path, std::span<const LogRow> rows, const std::string& metric_name) {
    std::string text = "step,loss," + metric_name + "\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,", r.step, r.loss);
        text += buf;
        if (r.metric) {
            std::snprintf(buf, sizeof buf, "%.9g", *r.metric);
            text += buf;
        }
        text += '\n';
    }
    detail::write_file_atomic(path, text);
}

}  // namespace qgcl::training
