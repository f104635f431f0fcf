#include "lightgrad/synth.hpp"

#include <cmath>

namespace lightgrad {

SamplerConfig sampler_config(const NoiseSchedule& sched, const SynthFlags& flags) {
    SamplerConfig cfg;
    cfg.method = flags.method;
    cfg.temperature = flags.tau;
    const GridSpacing spacing = flags.grid_set ? flags.grid : default_spacing(flags.method);
    cfg.grid = make_grid(sched, flags.nfe, spacing);
    cfg.seed = flags.seed;
    cfg.stream = 0;
    return cfg;
}

namespace {

std::vector<int> predict_durations(const std::vector<float>& log_dur) {
    std::vector<int> d(log_dur.size());
    for (size_t i = 0; i < log_dur.size(); ++i) {
        const double frames = std::round(std::exp(static_cast<double>(log_dur[i])));
        d[i] = frames < 1.0 ? 1 : static_cast<int>(frames);
    }
    return d;
}

struct EncodedPrior {
    std::vector<float> mu_pp;  // [P x M]
    std::vector<int> durations;
};

EncodedPrior encode_prior(const TtsModel& model, const std::vector<int>& phonemes,
                          const std::vector<int>* forced_durations) {
    auto enc_out = model.encoder.forward(phonemes);
    EncodedPrior out;
    out.mu_pp = enc_out.mu_pp.value();
    if (forced_durations) {
        require(forced_durations->size() == phonemes.size(),
                "synth: forced durations length mismatch");
        out.durations = *forced_durations;
    } else {
        out.durations = predict_durations(enc_out.log_dur.value());
    }
    return out;
}

}  // namespace

SynthResult synth(const TtsModel& model, const NoiseSchedule& sched,
                  const std::vector<int>& phonemes, const SynthFlags& flags,
                  const std::vector<int>* forced_durations) {
    const EncodedPrior prior = encode_prior(model, phonemes, forced_durations);
    const int P = static_cast<int>(phonemes.size());
    const int M = model.unet.cfg.n_mels;
    const Mel mu = expand(prior.mu_pp, P, M, prior.durations);
    SynthResult r;
    r.durations = prior.durations;
    r.mel = sample(score_adapter(model.unet), mu, sched, sampler_config(sched, flags));
    return r;
}

SynthResult synth_streaming(const TtsModel& model, const NoiseSchedule& sched,
                            const std::vector<int>& phonemes, const SynthFlags& flags,
                            const std::vector<int>* forced_durations,
                            const ChunkCallback<float>& on_chunk) {
    const EncodedPrior prior = encode_prior(model, phonemes, forced_durations);
    const int M = model.unet.cfg.n_mels;
    const ChunkPlan plan = plan_chunks(prior.durations, flags.min_frames, flags.max_frames);
    SynthResult r;
    r.durations = prior.durations;
    r.mel = decode_streaming(prior.mu_pp, M, prior.durations, plan,
                             score_adapter(model.unet), sched, sampler_config(sched, flags),
                             on_chunk, flags.parallel_chunks);
    return r;
}

}  // namespace lightgrad
