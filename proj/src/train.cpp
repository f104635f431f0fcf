#include "lightgrad/train.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "lightgrad/diffusion.hpp"

namespace fs = std::filesystem;

namespace lightgrad {

TrainConfig train_config_from(const Config& c) {
    TrainConfig t;
    t.lr = c.get_double("lr", t.lr);
    t.batch = c.get_int("batch", t.batch);
    t.iters = c.get_int("iters", t.iters);
    t.seed = c.get_u64("seed", t.seed);
    t.w_diff = c.get_double("w_diff", t.w_diff);
    t.w_enc = c.get_double("w_enc", t.w_enc);
    t.w_dur = c.get_double("w_dur", t.w_dur);
    t.log_every = c.get_int("log_every", t.log_every);
    t.ckpt_every = c.get_int("ckpt_every", t.ckpt_every);

    t.sched.beta0 = c.get_double("beta0", t.sched.beta0);
    t.sched.beta1 = c.get_double("beta1", t.sched.beta1);
    t.sched.horizon = c.get_double("horizon", t.sched.horizon);
    t.sched.t_min = c.get_double("t_min", t.sched.t_min);

    t.unet.base_channels = c.get_int("unet.base_channels", t.unet.base_channels);
    t.unet.channel_mults = {c.get_int("unet.mult0", t.unet.channel_mults[0]),
                            c.get_int("unet.mult1", t.unet.channel_mults[1]),
                            c.get_int("unet.mult2", t.unet.channel_mults[2])};
    t.unet.n_mels = c.get_int("n_mels", t.unet.n_mels);
    t.unet.groups = c.get_int("unet.groups", t.unet.groups);
    t.unet.heads = c.get_int("unet.heads", t.unet.heads);
    t.unet.res_kernel = c.get_int("unet.res_kernel", t.unet.res_kernel);
    t.unet.attn_kernel = c.get_int("unet.attn_kernel", t.unet.attn_kernel);
    t.unet.step_scale = c.get_double("unet.step_scale", t.unet.step_scale);
    t.unet.separable = c.get_bool("unet.separable", t.unet.separable);

    t.enc.vocab = c.get_int("enc.vocab", t.enc.vocab);
    t.enc.hidden = c.get_int("enc.hidden", t.enc.hidden);
    t.enc.channels = c.get_int("enc.channels", t.enc.channels);
    t.enc.blocks = c.get_int("enc.blocks", t.enc.blocks);
    t.enc.kernel = c.get_int("enc.kernel", t.enc.kernel);
    t.enc.groups = c.get_int("enc.groups", t.enc.groups);
    t.enc.dur_hidden = c.get_int("enc.dur_hidden", t.enc.dur_hidden);
    t.enc.dur_kernel = c.get_int("enc.dur_kernel", t.enc.dur_kernel);
    t.enc.n_mels = c.get_int("n_mels", t.enc.n_mels);
    return t;
}

TrainResult train(const TrainConfig& cfg, const Corpus& corpus,
                  const std::string& out_dir, const std::string& resume) {
    require(!corpus.utts.empty(), "train: empty corpus");
    require(cfg.batch >= 1 && cfg.iters >= 0, "train: invalid batch/iters");
    fs::create_directories(out_dir);

    TtsModel model;
    Adam adam;
    int64_t start_iter = 0;
    if (resume.empty()) {
        EncoderConfig enc_cfg = cfg.enc;
        enc_cfg.vocab = std::max(enc_cfg.vocab, corpus.vocab_size());
        model = build_model(enc_cfg, cfg.unet, cfg.seed);
        adam.init(model.registry());
    } else {
        LoadedModel loaded = load_model_checkpoint(resume);
        model = std::move(loaded.model);
        if (loaded.has_adam) adam = std::move(loaded.adam);
        else adam.init(model.registry());
        start_iter = loaded.iter;
    }
    adam.lr = cfg.lr;

    // preload all mels (desk-scale corpora)
    std::vector<Mel> mels;
    mels.reserve(corpus.utts.size());
    for (size_t i = 0; i < corpus.utts.size(); ++i) {
        mels.push_back(corpus.load_mel(i));
        require(mels.back().n_mels == cfg.unet.n_mels,
                "train: corpus n_mels does not match model config (" + corpus.utts[i].id + ")");
    }

    const auto reg = model.registry();
    auto net_fn = [&](const nn::TensorT<float>& x, const nn::TensorT<float>& mu, double t) {
        return model.unet.forward(x, mu, t);
    };

    std::ofstream log(fs::path(out_dir) / "train_log.txt", start_iter == 0
                                                               ? std::ios::trunc
                                                               : std::ios::app);
    const std::string final_path = (fs::path(out_dir) / "model.lgck").string();
    TrainResult result;
    result.checkpoint_path = final_path;

    for (int64_t iter = start_iter; iter < cfg.iters; ++iter) {
        Rng rit = Rng::fork(cfg.seed, (1ull << 32) + static_cast<uint64_t>(iter));
        double sum_diff = 0, sum_enc = 0, sum_dur = 0;

        for (const auto& [name, p] : reg.items) const_cast<nn::TensorT<float>&>(p).zero_grad();

        for (int b = 0; b < cfg.batch; ++b) {
            const size_t idx = static_cast<size_t>(rit.next_below(corpus.utts.size()));
            const auto& utt = corpus.utts[idx];
            const Mel& y = mels[idx];
            const int P = static_cast<int>(utt.phonemes.size());

            auto enc_out = model.encoder.forward(utt.phonemes);
            const auto ll = gaussian_log_like(enc_out.mu_pp.value(), P, y);
            const Alignment align = mas_align(ll, P, y.n_frames);

            auto mu_frames = nn::expand_rows(enc_out.mu_pp, align.durations);
            auto y_t = nn_bridge::to_tensor(y);

            auto loss_enc = encoder_loss(mu_frames, y_t);
            auto loss_dur = duration_loss(enc_out.log_dur, align.durations);

            const double t_diff = rit.uniform(cfg.sched.t_min, cfg.sched.horizon);
            auto eps = nn::TensorT<float>::zeros({y.n_mels, y.n_frames});
            for (auto& v : eps.value()) v = static_cast<float>(rit.gaussian());
            auto loss_diff = diffusion_loss_t(cfg.sched, net_fn, y_t, mu_frames, t_diff, eps);

            auto total = nn::scale(
                nn::add(nn::add(nn::scale(loss_diff, static_cast<float>(cfg.w_diff)),
                                nn::scale(loss_enc, static_cast<float>(cfg.w_enc))),
                        nn::scale(loss_dur, static_cast<float>(cfg.w_dur))),
                1.0f / static_cast<float>(cfg.batch));
            nn::backward(total);

            sum_diff += loss_diff.item();
            sum_enc += loss_enc.item();
            sum_dur += loss_dur.item();
        }

        adam.step(reg);

        result.last_loss_diff = sum_diff / cfg.batch;
        result.last_loss_enc = sum_enc / cfg.batch;
        result.last_loss_dur = sum_dur / cfg.batch;
        if (cfg.log_every > 0 && (iter % cfg.log_every == 0 || iter + 1 == cfg.iters)) {
            log << iter << " " << result.last_loss_diff << " " << result.last_loss_enc << " "
                << result.last_loss_dur << "\n";
            log.flush();
        }
        if (cfg.ckpt_every > 0 && iter > start_iter && iter % cfg.ckpt_every == 0)
            save_model_checkpoint(
                (fs::path(out_dir) / ("ckpt_" + std::to_string(iter) + ".lgck")).string(),
                model, &adam, iter);
    }

    save_model_checkpoint(final_path, model, &adam, cfg.iters);
    return result;
}

}  // namespace lightgrad
