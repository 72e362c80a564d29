// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dpanet/checkpoint.hpp"
#include "dpanet/dataset.hpp"
#include "dpanet/losses.hpp"
#include "dpanet/network.hpp"

namespace dpanet {

struct TrainConfig {
    int input_size = 256;
    int batch_size = 32;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double max_lr_backbone = 5e-3;
    double max_lr_other = 0.05;
    int epochs = 30;
    double warmup_fraction = 0.05;
    uint64_t seed = 7;
    FusionMode fusion_mode = FusionMode::multiply;
    GateMode gate_mode = GateMode::soft;
    bool depth_branch = true;
    BackboneKind backbone = BackboneKind::resnet50_shape;
    std::array<int, 5> toy_channels{8, 16, 32, 32, 32};
    int decoder_channels = 256;
    int gate_hidden = 512;
    double gamma = 0.3;
    LossWeights loss_weights;
    bool use_augment = true;
    int threads = 0;           // 0 = hardware concurrency
    int max_iterations = 0;    // 0 = epochs * ceil(n/batch); else hard cap
    int checkpoint_every_epochs = 1;

    void validate() const;  // throws on non-positive rates etc.
};

ModelConfig model_config_from(const TrainConfig& cfg);

// key=value codec shared by the config file, CLI overrides, and the
// checkpoint config snapshot.
std::vector<std::pair<std::string, std::string>> to_key_values(const TrainConfig& cfg);
void apply_key_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::map<std::string, std::string> parse_config_file(const std::string& path);
TrainConfig train_config_from(const std::vector<std::pair<std::string, std::string>>& kvs);

// Linear warm-up to (max_lr_backbone, max_lr_other) over the first
// warmup_fraction*total iterations, then linear decay towards 0 at
// iter = total. Both groups scale identically.
std::pair<double, double> lr_schedule(int64_t iter, int64_t total, const TrainConfig& cfg);

// SGD with momentum and weight decay: v = mu*v + (grad + wd*theta);
// theta -= lr*v. Parameters under "rgb.backbone."/"depth.backbone." use the
// backbone rate, everything else the other rate.
class Sgd {
public:
    Sgd(ParamStore& ps, double momentum, double weight_decay);
    void step(double lr_backbone, double lr_other);
    std::vector<std::pair<std::string, Tensor>> momentum_snapshot() const;
    void load_momentum(const std::vector<std::pair<std::string, Tensor>>& buffers);

private:
    ParamStore* ps_;
    double momentum_, weight_decay_;
    std::vector<Tensor> velocity_;
};

struct TrainLogRow {
    int64_t iter = 0;
    double lr_backbone = 0.0, lr_other = 0.0;
    double loss_dom = 0.0, loss_aux = 0.0, loss_reg = 0.0, loss_final = 0.0;
};

struct ValRow {
    int epoch = 0;
    double mae = 0.0, max_f = 0.0, mean_gate_err = 0.0;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::vector<ValRow> val_history;
    Checkpoint final_checkpoint;
    std::shared_ptr<ParamStore> params;
    std::shared_ptr<DpaNet> model;
};

// Deterministic end-to-end training. log_csv (optional) receives one CSV row
// per iteration: iter,lr_backbone,lr_other,loss_dom,loss_aux,loss_reg,loss_final.
// Aborts with a diagnostic on non-finite loss.
TrainResult train(const TrainConfig& cfg, const std::vector<RgbdSample>& train_set,
                  const std::vector<RgbdSample>& val_set = {}, std::ostream* log_csv = nullptr,
                  const std::string& checkpoint_dir = "");

// Builds a model (and its parameter store) from a checkpoint written by
// train(); used by the inference and evaluation paths.
struct LoadedModel {
    TrainConfig config;
    std::shared_ptr<ParamStore> params;
    std::shared_ptr<DpaNet> model;
};
LoadedModel load_model(const Checkpoint& ckpt);

// Mean |g_hat - g| of a model over samples carrying dp labels.
double mean_gate_error(const DpaNet& model, const std::vector<RgbdSample>& samples, int input_size);

}  // namespace dpanet
