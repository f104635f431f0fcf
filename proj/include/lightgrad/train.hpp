#pragma once

#include <cstdint>
#include <string>

#include "lightgrad/config.hpp"
#include "lightgrad/corpus.hpp"
#include "lightgrad/model.hpp"
#include "lightgrad/schedule.hpp"

namespace lightgrad {

struct TrainConfig {
    double lr = 1e-4;
    int batch = 16;
    int iters = 0;
    uint64_t seed = 0;
    double w_diff = 1.0, w_enc = 1.0, w_dur = 1.0;
    NoiseSchedule sched;
    EncoderConfig enc;
    UNetConfig unet;
    int log_every = 50;
    int ckpt_every = 1000;
};

// Fill a TrainConfig from a flat key=value Config (every default overridable).
TrainConfig train_config_from(const Config& c);

struct TrainResult {
    std::string checkpoint_path;  // final checkpoint
    double last_loss_diff = 0.0, last_loss_enc = 0.0, last_loss_dur = 0.0;
};

// Adam over diffusion + encoder NLL + log-duration MSE with MAS-refreshed
// alignments. Deterministic given the seed: per-iteration randomness is
// derived from (seed, iter), so resuming from a checkpoint reproduces the
// continuation bit-exactly. Pass resume to continue from a checkpoint.
TrainResult train(const TrainConfig& cfg, const Corpus& corpus,
                  const std::string& out_dir, const std::string& resume = "");

}  // namespace lightgrad
