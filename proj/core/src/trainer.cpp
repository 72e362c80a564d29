// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dpanet/metrics.hpp"

namespace dpanet {

void TrainConfig::validate() const {
    if (input_size < 32 || input_size % 32 != 0)
        throw std::invalid_argument("input_size must be a positive multiple of 32");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (max_lr_backbone <= 0.0 || max_lr_other <= 0.0)
        throw std::invalid_argument("learning rates must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
        throw std::invalid_argument("warmup_fraction must be in [0,1)");
    if (gamma <= 0.0) throw std::invalid_argument("gamma must be > 0");
    if (decoder_channels < 1) throw std::invalid_argument("decoder_channels must be >= 1");
}

ModelConfig model_config_from(const TrainConfig& cfg) {
    ModelConfig m;
    m.backbone = cfg.backbone;
    m.toy_channels = cfg.toy_channels;
    m.input_size = cfg.input_size;
    m.decoder_channels = cfg.decoder_channels;
    m.gate_hidden = cfg.gate_hidden;
    m.fusion_mode = cfg.fusion_mode;
    m.gate_mode = cfg.gate_mode;
    m.depth_branch = cfg.depth_branch;
    return m;
}

// ---- config codec -----------------------------------------------------------

namespace {

std::string fusion_mode_str(FusionMode m) {
    switch (m) {
        case FusionMode::multiply: return "multiply";
        case FusionMode::concat: return "concat";
        case FusionMode::sum: return "sum";
    }
    return "multiply";
}

FusionMode fusion_mode_from(const std::string& s) {
    if (s == "multiply") return FusionMode::multiply;
    if (s == "concat") return FusionMode::concat;
    if (s == "sum") return FusionMode::sum;
    throw std::invalid_argument("unknown fusion_mode: " + s);
}

std::string gate_mode_str(GateMode m) {
    switch (m) {
        case GateMode::soft: return "soft";
        case GateMode::hard: return "hard";
        case GateMode::off: return "off";
    }
    return "soft";
}

GateMode gate_mode_from(const std::string& s) {
    if (s == "soft") return GateMode::soft;
    if (s == "hard") return GateMode::hard;
    if (s == "off") return GateMode::off;
    throw std::invalid_argument("unknown gate_mode: " + s);
}

std::string backbone_str(BackboneKind k) {
    return k == BackboneKind::toy ? "toy" : "resnet50-shape";
}

BackboneKind backbone_from(const std::string& s) {
    if (s == "toy") return BackboneKind::toy;
    if (s == "resnet50-shape") return BackboneKind::resnet50_shape;
    throw std::invalid_argument("unknown backbone: " + s);
}

std::string num_str(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <size_t N>
std::string list_str(const std::array<double, N>& a) {
    std::ostringstream os;
    os.precision(17);
    for (size_t i = 0; i < N; ++i) os << (i ? "," : "") << a[i];
    return os.str();
}

std::string list_str(const std::array<int, 5>& a) {
    std::ostringstream os;
    for (size_t i = 0; i < 5; ++i) os << (i ? "," : "") << a[i];
    return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> to_key_values(const TrainConfig& cfg) {
    return {
        {"input_size", std::to_string(cfg.input_size)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"momentum", num_str(cfg.momentum)},
        {"weight_decay", num_str(cfg.weight_decay)},
        {"max_lr_backbone", num_str(cfg.max_lr_backbone)},
        {"max_lr_other", num_str(cfg.max_lr_other)},
        {"epochs", std::to_string(cfg.epochs)},
        {"warmup_fraction", num_str(cfg.warmup_fraction)},
        {"seed", std::to_string(cfg.seed)},
        {"fusion_mode", fusion_mode_str(cfg.fusion_mode)},
        {"gate_mode", gate_mode_str(cfg.gate_mode)},
        {"depth_branch", cfg.depth_branch ? "on" : "off"},
        {"backbone", backbone_str(cfg.backbone)},
        {"toy_channels", list_str(cfg.toy_channels)},
        {"decoder_channels", std::to_string(cfg.decoder_channels)},
        {"gate_hidden", std::to_string(cfg.gate_hidden)},
        {"gamma", num_str(cfg.gamma)},
        {"lambda_aux", list_str(cfg.loss_weights.lambda_aux)},
        {"lambda_reg", num_str(cfg.loss_weights.lambda_reg)},
        {"augment", cfg.use_augment ? "1" : "0"},
        {"threads", std::to_string(cfg.threads)},
        {"max_iterations", std::to_string(cfg.max_iterations)},
        {"checkpoint_every_epochs", std::to_string(cfg.checkpoint_every_epochs)},
    };
}

void apply_key_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "input_size") cfg.input_size = std::stoi(value);
        else if (key == "batch_size") cfg.batch_size = std::stoi(value);
        else if (key == "momentum") cfg.momentum = std::stod(value);
        else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
        else if (key == "max_lr_backbone") cfg.max_lr_backbone = std::stod(value);
        else if (key == "max_lr_other") cfg.max_lr_other = std::stod(value);
        else if (key == "epochs") cfg.epochs = std::stoi(value);
        else if (key == "warmup_fraction") cfg.warmup_fraction = std::stod(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "fusion_mode") cfg.fusion_mode = fusion_mode_from(value);
        else if (key == "gate_mode") cfg.gate_mode = gate_mode_from(value);
        else if (key == "depth_branch") cfg.depth_branch = (value == "on" || value == "1");
        else if (key == "backbone") cfg.backbone = backbone_from(value);
        else if (key == "toy_channels") {
            auto parts = split_list(value);
            if (parts.size() != 5) throw std::invalid_argument("toy_channels needs 5 entries");
            for (size_t i = 0; i < 5; ++i) cfg.toy_channels[i] = std::stoi(parts[i]);
        } else if (key == "decoder_channels") cfg.decoder_channels = std::stoi(value);
        else if (key == "gate_hidden") cfg.gate_hidden = std::stoi(value);
        else if (key == "gamma") cfg.gamma = std::stod(value);
        else if (key == "lambda_aux") {
            auto parts = split_list(value);
            if (parts.size() != 8) throw std::invalid_argument("lambda_aux needs 8 entries");
            for (size_t i = 0; i < 8; ++i) cfg.loss_weights.lambda_aux[i] = std::stod(parts[i]);
        } else if (key == "lambda_reg") cfg.loss_weights.lambda_reg = std::stod(value);
        else if (key == "augment") cfg.use_augment = (value == "1" || value == "true" || value == "on");
        else if (key == "threads") cfg.threads = std::stoi(value);
        else if (key == "max_iterations") cfg.max_iterations = std::stoi(value);
        else if (key == "checkpoint_every_epochs") cfg.checkpoint_every_epochs = std::stoi(value);
        else throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad value for config key " + key + ": " + value);
    }
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kvs;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto strip = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        strip(key);
        strip(value);
        kvs[key] = value;
    }
    return kvs;
}

TrainConfig train_config_from(const std::vector<std::pair<std::string, std::string>>& kvs) {
    TrainConfig cfg;
    for (const auto& [k, v] : kvs) apply_key_value(cfg, k, v);
    return cfg;
}

// ---- schedule & optimizer ------------------------------------------------------

std::pair<double, double> lr_schedule(int64_t iter, int64_t total, const TrainConfig& cfg) {
    if (iter < 0 || iter >= total) throw std::out_of_range("lr_schedule: iter out of [0,total)");
    const int64_t warmup = static_cast<int64_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total)));
    double f;
    if (warmup > 0 && iter < warmup) {
        f = static_cast<double>(iter) / static_cast<double>(warmup);
    } else {
        f = static_cast<double>(total - iter) / static_cast<double>(total - warmup);
    }
    return {cfg.max_lr_backbone * f, cfg.max_lr_other * f};
}

Sgd::Sgd(ParamStore& ps, double momentum, double weight_decay)
    : ps_(&ps), momentum_(momentum), weight_decay_(weight_decay) {
    velocity_.reserve(ps.entries().size());
    for (const auto& [name, var] : ps.entries()) velocity_.emplace_back(var.value().shape());
}

void Sgd::step(double lr_backbone, double lr_other) {
    const auto& entries = ps_->entries();
    if (velocity_.size() != entries.size()) throw std::logic_error("Sgd: parameter set changed");
    for (size_t i = 0; i < entries.size(); ++i) {
        const std::string& name = entries[i].first;
        Variable var = entries[i].second;
        const bool is_backbone = name.rfind("rgb.backbone.", 0) == 0 ||
                                 name.rfind("depth.backbone.", 0) == 0;
        const double lr = is_backbone ? lr_backbone : lr_other;
        Tensor& theta = var.mutable_value();
        const Tensor& g = var.grad();
        Tensor& v = velocity_[i];
        for (int64_t j = 0; j < theta.numel(); ++j) {
            v[j] = momentum_ * v[j] + g[j] + weight_decay_ * theta[j];
            theta[j] -= lr * v[j];
        }
    }
}

std::vector<std::pair<std::string, Tensor>> Sgd::momentum_snapshot() const {
    std::vector<std::pair<std::string, Tensor>> out;
    const auto& entries = ps_->entries();
    for (size_t i = 0; i < entries.size(); ++i)
        out.emplace_back("momentum." + entries[i].first, velocity_[i]);
    return out;
}

void Sgd::load_momentum(const std::vector<std::pair<std::string, Tensor>>& buffers) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : buffers) by_name[name] = &t;
    const auto& entries = ps_->entries();
    for (size_t i = 0; i < entries.size(); ++i) {
        auto it = by_name.find("momentum." + entries[i].first);
        if (it == by_name.end()) continue;
        if (!(it->second->shape() == velocity_[i].shape()))
            throw std::runtime_error("momentum shape mismatch for " + entries[i].first);
        velocity_[i] = *it->second;
    }
}

// ---- training loop ---------------------------------------------------------------

namespace {

struct SampleLosses {
    double dom = 0.0, aux = 0.0, reg = 0.0, final_v = 0.0;
};

struct PreparedSample {
    Tensor rgb, depth, gt;
    double g_label = 1.0;
};

// builds the per-sample graph and runs backward into the installed sink
SampleLosses process_sample(const DpaNet& model, const TrainConfig& cfg, const PreparedSample& ps,
                            double inv_batch) {
    ForwardResult fr = model.forward(ps.rgb, ps.depth, /*training=*/true);
    Variable dom = bce_loss(fr.saliency, ps.gt);
    Variable cls;
    if (fr.aux.size() == 8) {
        cls = classification_loss(fr.saliency, fr.aux, ps.gt, cfg.loss_weights);
    } else {
        cls = dom;  // rgb-only: four side outputs bound to lambda_1..4
        for (size_t i = 0; i < fr.aux.size(); ++i) {
            const double w = cfg.loss_weights.lambda_aux[i];
            if (w > 0.0) cls = add(cls, mul_scalar(bce_loss(fr.aux[i], ps.gt), w));
        }
    }

    Variable reg;
    if (cfg.depth_branch && cfg.gate_mode == GateMode::soft) {
        reg = smooth_l1(fr.g_hat, ps.g_label);
    } else if (cfg.depth_branch && cfg.gate_mode == GateMode::hard) {
        reg = bce_mean(fr.g_hat, Tensor::scalar(ps.g_label >= 0.5 ? 1.0 : 0.0));
    }

    Variable total = final_loss(cls, reg, cfg.loss_weights.lambda_reg);
    mul_scalar(total, inv_batch).backward();

    SampleLosses out;
    out.dom = dom.value()[0];
    out.aux = cls.value()[0] - out.dom;
    out.reg = reg.defined() ? reg.value()[0] : 0.0;
    out.final_v = total.value()[0];
    return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<RgbdSample>& train_set,
                  const std::vector<RgbdSample>& val_set, std::ostream* log_csv,
                  const std::string& checkpoint_dir) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty dataset");

    auto params = std::make_shared<ParamStore>();
    Rng init_rng(cfg.seed);
    auto model = std::make_shared<DpaNet>(model_config_from(cfg), *params, init_rng);
    Sgd sgd(*params, cfg.momentum, cfg.weight_decay);
    Rng data_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<RgbdSample> tr = train_set;
    for (auto& s : tr)
        if (!s.dp) s.dp = dp_label(s.depth, s.gt, cfg.gamma);

    const int64_t n = static_cast<int64_t>(tr.size());
    const int64_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    int64_t total_iters = static_cast<int64_t>(cfg.epochs) * batches_per_epoch;
    if (cfg.max_iterations > 0) total_iters = std::min<int64_t>(total_iters, cfg.max_iterations);

    const int hw_threads = static_cast<int>(std::thread::hardware_concurrency());
    const int worker_count = cfg.threads > 0 ? cfg.threads : std::max(1, hw_threads);

    if (log_csv) {
        (*log_csv) << "iter,lr_backbone,lr_other,loss_dom,loss_aux,loss_reg,loss_final\n";
        log_csv->precision(9);
    }

    TrainResult res;
    res.params = params;
    res.model = model;

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    int64_t iter = 0;
    for (int epoch = 0; epoch < cfg.epochs && iter < total_iters; ++epoch) {
        std::shuffle(order.begin(), order.end(), data_rng.engine());
        for (int64_t b = 0; b < n && iter < total_iters; b += cfg.batch_size) {
            const int64_t batch_n = std::min<int64_t>(cfg.batch_size, n - b);
            const double inv_batch = 1.0 / static_cast<double>(batch_n);

            // serial prep keeps the augmentation rng draw order canonical
            std::vector<PreparedSample> prepared(static_cast<size_t>(batch_n));
            for (int64_t i = 0; i < batch_n; ++i) {
                const RgbdSample& src = tr[static_cast<size_t>(order[static_cast<size_t>(b + i)])];
                RgbdSample s = cfg.use_augment ? augment(src, data_rng, cfg.input_size)
                                               : prepare(src, cfg.input_size);
                PreparedSample& p = prepared[static_cast<size_t>(i)];
                p.rgb = conditioned_rgb(s.rgb);
                p.depth = conditioned_depth(s.depth);
                p.gt = mask_to_tensor(s.gt);
                p.g_label = src.dp ? src.dp->g : 1.0;
            }

            params->zero_grads();
            std::vector<detail::GradSink> sinks(static_cast<size_t>(batch_n));
            std::vector<SampleLosses> losses(static_cast<size_t>(batch_n));
            std::vector<std::exception_ptr> errors(static_cast<size_t>(batch_n));

            auto run_range = [&](int64_t lo, int64_t hi, bool in_worker) {
                if (in_worker) set_thread_parallelism(false);
                for (int64_t i = lo; i < hi; ++i) {
                    detail::GradSink* prev = detail::exchange_thread_grad_sink(&sinks[static_cast<size_t>(i)]);
                    try {
                        losses[static_cast<size_t>(i)] =
                            process_sample(*model, cfg, prepared[static_cast<size_t>(i)], inv_batch);
                    } catch (...) {
                        errors[static_cast<size_t>(i)] = std::current_exception();
                    }
                    detail::exchange_thread_grad_sink(prev);
                }
                if (in_worker) set_thread_parallelism(true);
            };

            const int nt = static_cast<int>(std::min<int64_t>(worker_count, batch_n));
            if (nt <= 1) {
                run_range(0, batch_n, false);
            } else {
                std::vector<std::thread> workers;
                const int64_t chunk = (batch_n + nt - 1) / nt;
                for (int t = 1; t < nt; ++t) {
                    const int64_t lo = t * chunk, hi = std::min<int64_t>(batch_n, (t + 1) * chunk);
                    if (lo >= hi) break;
                    workers.emplace_back([&run_range, lo, hi] { run_range(lo, hi, true); });
                }
                run_range(0, std::min<int64_t>(chunk, batch_n), true);
                for (auto& w : workers) w.join();
            }
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);

            // merge per-sample gradients in sample order
            for (auto& sink : sinks)
                for (auto& [node, g] : sink.grads) detail::accumulate(*node, g);

            SampleLosses mean;
            for (const auto& l : losses) {
                mean.dom += l.dom * inv_batch;
                mean.aux += l.aux * inv_batch;
                mean.reg += l.reg * inv_batch;
                mean.final_v += l.final_v;  // already scaled by inv_batch
            }
            if (!std::isfinite(mean.final_v))
                throw std::runtime_error("training diverged: non-finite loss at iteration " +
                                         std::to_string(iter));

            const auto [lr_b, lr_o] = lr_schedule(iter, total_iters, cfg);
            sgd.step(lr_b, lr_o);

            TrainLogRow row{iter, lr_b, lr_o, mean.dom, mean.aux, mean.reg, mean.final_v};
            res.log.push_back(row);
            if (log_csv) {
                (*log_csv) << row.iter << ',' << row.lr_backbone << ',' << row.lr_other << ','
                           << row.loss_dom << ',' << row.loss_aux << ',' << row.loss_reg << ','
                           << row.loss_final << '\n';
            }
            ++iter;
        }

        if (!val_set.empty()) {
            ValRow v;
            v.epoch = epoch;
            double gate_err = 0.0;
            int gate_n = 0;
            for (const auto& sample : val_set) {
                RgbdSample s = prepare(sample, cfg.input_size);
                ForwardResult fr =
                    model->forward(conditioned_rgb(s.rgb), conditioned_depth(s.depth), false);
                GrayImage pred = make_gray(cfg.input_size, cfg.input_size, PixelMode::unit_range);
                const Tensor& sv = fr.saliency.value();
                for (int64_t i = 0; i < sv.numel(); ++i) pred.values[static_cast<size_t>(i)] = sv[i];
                v.mae += mae(pred, s.gt);
                if (s.gt.area() > 0) v.max_f += max_f_measure(pr_curve(pred, s.gt));
                auto dp = sample.dp ? *sample.dp : dp_label(sample.depth, sample.gt, cfg.gamma);
                gate_err += std::fabs(fr.g_hat.value()[0] - dp.g);
                ++gate_n;
            }
            v.mae /= static_cast<double>(val_set.size());
            v.max_f /= static_cast<double>(val_set.size());
            v.mean_gate_err = gate_n ? gate_err / gate_n : 0.0;
            res.val_history.push_back(v);
        }

        if (!checkpoint_dir.empty() && cfg.checkpoint_every_epochs > 0 &&
            (epoch + 1) % cfg.checkpoint_every_epochs == 0) {
            Checkpoint ck = snapshot_params(*params);
            for (auto& mb : sgd.momentum_snapshot()) ck.arrays.push_back(std::move(mb));
            ck.iteration = iter;
            ck.config = to_key_values(cfg);
            std::filesystem::create_directories(checkpoint_dir);
            save_checkpoint((std::filesystem::path(checkpoint_dir) /
                             ("ckpt_epoch" + std::to_string(epoch + 1) + ".dpan"))
                                .string(),
                            ck);
        }
    }

    res.final_checkpoint = snapshot_params(*params);
    for (auto& mb : sgd.momentum_snapshot()) res.final_checkpoint.arrays.push_back(std::move(mb));
    res.final_checkpoint.iteration = iter;
    res.final_checkpoint.config = to_key_values(cfg);
    if (!checkpoint_dir.empty()) {
        std::filesystem::create_directories(checkpoint_dir);
        save_checkpoint((std::filesystem::path(checkpoint_dir) / "ckpt_final.dpan").string(),
                        res.final_checkpoint);
    }
    return res;
}

LoadedModel load_model(const Checkpoint& ckpt) {
    LoadedModel lm;
    lm.config = train_config_from(ckpt.config);
    lm.params = std::make_shared<ParamStore>();
    Rng rng(lm.config.seed);
    lm.model = std::make_shared<DpaNet>(model_config_from(lm.config), *lm.params, rng);
    load_params(ckpt, *lm.params);
    return lm;
}

double mean_gate_error(const DpaNet& model, const std::vector<RgbdSample>& samples,
                       int input_size) {
    if (samples.empty()) throw std::invalid_argument("mean_gate_error: no samples");
    double acc = 0.0;
    for (const auto& sample : samples) {
        const double g = sample.dp ? sample.dp->g : dp_label(sample.depth, sample.gt).g;
        RgbdSample s = prepare(sample, input_size);
        ForwardResult fr = model.forward(conditioned_rgb(s.rgb), conditioned_depth(s.depth), false);
        acc += std::fabs(fr.g_hat.value()[0] - g);
    }
    return acc / static_cast<double>(samples.size());
}

}  // namespace dpanet
