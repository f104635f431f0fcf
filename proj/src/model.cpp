#include "lightgrad/model.hpp"

#include <cmath>

namespace lightgrad {

TtsModel build_model(const EncoderConfig& enc_cfg, const UNetConfig& unet_cfg,
                     uint64_t seed) {
    require(enc_cfg.n_mels == unet_cfg.n_mels,
            "build_model: encoder and unet n_mels disagree");
    TtsModel m;
    m.encoder = Encoder::build(enc_cfg, seed);
    m.unet = UNet::build(unet_cfg, seed);
    return m;
}

void Adam::init(const nn::ParamRegistry<float>& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const auto& [name, p] : params.items) {
        m.emplace_back(p.value().size(), 0.0f);
        v.emplace_back(p.value().size(), 0.0f);
    }
}

void Adam::step(const nn::ParamRegistry<float>& params) {
    require(m.size() == params.items.size(), "adam: state/parameter count mismatch");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.items.size(); ++i) {
        auto& p = const_cast<nn::TensorT<float>&>(params.items[i].second);
        auto& val = p.value();
        auto& g = p.grad();
        auto& mi = m[i];
        auto& vi = v[i];
        for (size_t j = 0; j < val.size(); ++j) {
            mi[j] = static_cast<float>(beta1 * mi[j] + (1.0 - beta1) * g[j]);
            vi[j] = static_cast<float>(beta2 * vi[j] + (1.0 - beta2) * g[j] * g[j]);
            const double mh = mi[j] / bc1;
            const double vh = vi[j] / bc2;
            val[j] -= static_cast<float>(lr * mh / (std::sqrt(vh) + eps));
        }
    }
}

namespace {

std::vector<uint32_t> to_extents(const std::vector<int>& shape) {
    std::vector<uint32_t> e;
    e.reserve(shape.size());
    for (int d : shape) e.push_back(static_cast<uint32_t>(d));
    return e;
}

void add_meta(Checkpoint& c, const EncoderConfig& e, const UNetConfig& u) {
    c.add_scalar("meta.version", 1.0f);
    c.add_scalar("meta.enc.vocab", static_cast<float>(e.vocab));
    c.add_scalar("meta.enc.hidden", static_cast<float>(e.hidden));
    c.add_scalar("meta.enc.channels", static_cast<float>(e.channels));
    c.add_scalar("meta.enc.blocks", static_cast<float>(e.blocks));
    c.add_scalar("meta.enc.kernel", static_cast<float>(e.kernel));
    c.add_scalar("meta.enc.groups", static_cast<float>(e.groups));
    c.add_scalar("meta.enc.dur_hidden", static_cast<float>(e.dur_hidden));
    c.add_scalar("meta.enc.dur_kernel", static_cast<float>(e.dur_kernel));
    c.add_scalar("meta.enc.n_mels", static_cast<float>(e.n_mels));
    c.add_scalar("meta.unet.base_channels", static_cast<float>(u.base_channels));
    c.add_scalar("meta.unet.mult0", static_cast<float>(u.channel_mults[0]));
    c.add_scalar("meta.unet.mult1", static_cast<float>(u.channel_mults[1]));
    c.add_scalar("meta.unet.mult2", static_cast<float>(u.channel_mults[2]));
    c.add_scalar("meta.unet.n_mels", static_cast<float>(u.n_mels));
    c.add_scalar("meta.unet.groups", static_cast<float>(u.groups));
    c.add_scalar("meta.unet.heads", static_cast<float>(u.heads));
    c.add_scalar("meta.unet.res_kernel", static_cast<float>(u.res_kernel));
    c.add_scalar("meta.unet.attn_kernel", static_cast<float>(u.attn_kernel));
    c.add_scalar("meta.unet.step_scale", static_cast<float>(u.step_scale));
    c.add_scalar("meta.unet.separable", u.separable ? 1.0f : 0.0f);
}

int meta_int(const Checkpoint& c, const std::string& key) {
    return static_cast<int>(c.scalar(key));
}

}  // namespace

void save_model_checkpoint(const std::string& path, const TtsModel& model,
                           const Adam* adam, int64_t iter) {
    Checkpoint c;
    add_meta(c, model.encoder.cfg, model.unet.cfg);
    c.add_scalar("train.iter", static_cast<float>(iter));
    const auto reg = model.registry();
    for (const auto& [name, p] : reg.items)
        c.add(name, to_extents(p.shape()), p.value());
    if (adam) {
        c.add_scalar("train.adam_t", static_cast<float>(adam->t));
        for (size_t i = 0; i < reg.items.size(); ++i) {
            c.add("adam.m." + reg.items[i].first, to_extents(reg.items[i].second.shape()),
                  adam->m[i]);
            c.add("adam.v." + reg.items[i].first, to_extents(reg.items[i].second.shape()),
                  adam->v[i]);
        }
    }
    write_checkpoint(path, c);
}

LoadedModel load_model_checkpoint(const std::string& path) {
    const Checkpoint c = read_checkpoint(path);
    if (!c.find("meta.version")) throw format_error("checkpoint missing meta entries: " + path);

    EncoderConfig e;
    e.vocab = meta_int(c, "meta.enc.vocab");
    e.hidden = meta_int(c, "meta.enc.hidden");
    e.channels = meta_int(c, "meta.enc.channels");
    e.blocks = meta_int(c, "meta.enc.blocks");
    e.kernel = meta_int(c, "meta.enc.kernel");
    e.groups = meta_int(c, "meta.enc.groups");
    e.dur_hidden = meta_int(c, "meta.enc.dur_hidden");
    e.dur_kernel = meta_int(c, "meta.enc.dur_kernel");
    e.n_mels = meta_int(c, "meta.enc.n_mels");

    UNetConfig u;
    u.base_channels = meta_int(c, "meta.unet.base_channels");
    u.channel_mults = {meta_int(c, "meta.unet.mult0"), meta_int(c, "meta.unet.mult1"),
                       meta_int(c, "meta.unet.mult2")};
    u.n_mels = meta_int(c, "meta.unet.n_mels");
    u.groups = meta_int(c, "meta.unet.groups");
    u.heads = meta_int(c, "meta.unet.heads");
    u.res_kernel = meta_int(c, "meta.unet.res_kernel");
    u.attn_kernel = meta_int(c, "meta.unet.attn_kernel");
    u.step_scale = c.scalar("meta.unet.step_scale");
    u.separable = c.scalar("meta.unet.separable") != 0.0f;

    LoadedModel out;
    out.model = build_model(e, u, 0);
    out.iter = static_cast<int64_t>(c.scalar("train.iter"));

    const auto reg = out.model.registry();
    for (const auto& [name, p] : reg.items) {
        const auto& entry = c.at(name);
        if (entry.numel() != p.numel())
            throw format_error("checkpoint entry size mismatch for " + name);
        const_cast<nn::TensorT<float>&>(p).value() = entry.data;
    }

    if (c.find("train.adam_t")) {
        out.has_adam = true;
        out.adam.t = static_cast<int64_t>(c.scalar("train.adam_t"));
        out.adam.m.clear();
        out.adam.v.clear();
        for (const auto& [name, p] : reg.items) {
            out.adam.m.push_back(c.at("adam.m." + name).data);
            out.adam.v.push_back(c.at("adam.v." + name).data);
        }
    }
    return out;
}

}  // namespace lightgrad
