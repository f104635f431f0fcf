#pragma once

#include <cstdint>
#include <string>

#include "lightgrad/checkpoint.hpp"
#include "lightgrad/tts.hpp"
#include "lightgrad/unet.hpp"

namespace lightgrad {

// Encoder + duration head + U-Net decoder, with a shared named-parameter
// registry used for optimization and checkpointing.
struct TtsModel {
    Encoder encoder;
    UNet unet;

    nn::ParamRegistry<float> registry() const {
        nn::ParamRegistry<float> r;
        encoder.register_params("enc", r);
        unet.register_params("unet", r);
        return r;
    }
    int64_t param_count() const { return registry().count(); }
};

TtsModel build_model(const EncoderConfig& enc_cfg, const UNetConfig& unet_cfg,
                     uint64_t seed);

// Adam with bias correction; state lives in f32 like the parameters, so
// checkpointed state round-trips bit-exactly.
struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<std::vector<float>> m, v;

    void init(const nn::ParamRegistry<float>& params);
    void step(const nn::ParamRegistry<float>& params);
};

// Model + optimizer + iteration counter as one checkpoint file. Topology is
// stored in meta.* entries so the model can be rebuilt without the original
// config file.
void save_model_checkpoint(const std::string& path, const TtsModel& model,
                           const Adam* adam, int64_t iter);

struct LoadedModel {
    TtsModel model;
    Adam adam;
    bool has_adam = false;
    int64_t iter = 0;
};

LoadedModel load_model_checkpoint(const std::string& path);

inline auto score_adapter(const UNet& net) {
    return [&net](const Mel& x, const Mel& mu, double t) { return net.score_mel(x, mu, t); };
}

}  // namespace lightgrad
