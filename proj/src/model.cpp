#include "forma/model.hpp"

#include <cstring>
#include <fstream>

namespace forma {

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "no_noise") return Variant::no_noise;
    if (s == "no_shuffle") return Variant::no_shuffle;
    if (s == "noise_into_encoder") return Variant::noise_into_encoder;
    if (s == "no_dice") return Variant::no_dice;
    if (s == "no_focal") return Variant::no_focal;
    throw UsageError("unknown variant '" + s + "'");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_noise: return "no_noise";
        case Variant::no_shuffle: return "no_shuffle";
        case Variant::noise_into_encoder: return "noise_into_encoder";
        case Variant::no_dice: return "no_dice";
        case Variant::no_focal: return "no_focal";
    }
    throw UsageError("unknown variant value");
}

ModelConfig ModelConfig::toy_scale() {
    ModelConfig c;
    c.scale = "toy";
    c.embed_dim = 16;
    c.depths = {1, 1, 2, 1};
    c.state_dim = 4;
    c.resid_channels = 8;
    c.fmod_channels = 16;
    c.input_size = 64;
    return c;
}

ModelConfig ModelConfig::paper_scale() {
    ModelConfig c;
    c.scale = "paper";
    c.embed_dim = 96;
    c.depths = {2, 2, 9, 2};
    c.state_dim = 16;
    c.resid_channels = 16;
    c.fmod_channels = 96;
    c.input_size = 512;
    return c;
}

ModelConfig ModelConfig::from_scale(const std::string& scale) {
    if (scale == "toy") return toy_scale();
    if (scale == "paper") return paper_scale();
    throw UsageError("unknown scale '" + scale + "', expected toy or paper");
}

FormaNet FormaNet::init(std::uint64_t seed, const ModelConfig& cfg) {
    std::mt19937_64 rng(seed);
    FormaNet net;
    net.cfg = cfg;
    net.encoder = VssEncoder::init(rng, cfg);
    if (has_noise_branch(cfg.variant)) net.noise = NoiseExtractor::init(rng, cfg);
    if (cfg.variant == Variant::noise_into_encoder)
        net.stem_noise_mix =
            LinearLayer::init(rng, cfg.embed_dim + cfg.fmod_channels, cfg.embed_dim);
    net.decoder = ShuffleDecoder::init(rng, cfg);
    return net;
}

FormaNet::Output FormaNet::forward(Graph& g, const Tensor& image,
                                   const Tensor& noise_override,
                                   std::int64_t chunk) const {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw DimensionError("model: want an RGB image [3,H,W], got " +
                             shape_str(image.shape()));
    const std::int64_t h = image.dim(1), w = image.dim(2);
    if (h % 32 != 0 || w % 32 != 0)
        throw DimensionError("model: extents must be multiples of 32 so all four "
                             "stages line up, got " + shape_str(image.shape()));

    Tensor fmod;  // stride-4 noise tokens [H/4, W/4, C_mod]
    if (has_noise_branch(cfg.variant)) {
        if (noise_override.defined()) {
            if (noise_override.ndim() != 3 || noise_override.dim(0) != cfg.fmod_channels ||
                noise_override.dim(1) != h / 4 || noise_override.dim(2) != w / 4)
                throw DimensionError("noise override " + shape_str(noise_override.shape()) +
                                     " does not match [C_mod,H/4,W/4] for this input");
            fmod = ops::chw_to_hwc(g, noise_override);
        } else {
            fmod = noise.forward(g, image);
        }
    } else if (noise_override.defined()) {
        throw UsageError("noise override given, but this variant has no noise branch");
    }

    Tensor tokens = encoder.embed(g, image);
    if (cfg.variant == Variant::noise_into_encoder)
        tokens = stem_noise_mix.forward(g, ops::concat_last(g, {tokens, fmod}));
    FeaturePyramid pyr = encoder.run_stages(g, tokens, chunk);

    Output out;
    out.logits = decoder.forward(g, pyr, noise_in_decoder(cfg.variant) ? fmod : Tensor());
    out.prob = logits_to_prob(g, out.logits, h, w);
    if (!out.prob.all_finite())
        throw NumericError("model forward produced non-finite probabilities");
    return out;
}

std::vector<NamedParam> FormaNet::parameters() const {
    std::vector<NamedParam> out;
    encoder.collect("encoder", out);
    if (has_noise_branch(cfg.variant)) noise.collect("noise", out);
    if (cfg.variant == Variant::noise_into_encoder)
        stem_noise_mix.collect("stem_noise_mix", out);
    decoder.collect("decoder", out);
    return out;
}

void FormaNet::project_constraints(std::mt19937_64& rng) {
    if (has_noise_branch(cfg.variant)) bayar_project(noise.bayar, &rng);
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"scale", cfg.scale},
            {"embed_dim", cfg.embed_dim},
            {"depths", cfg.depths},
            {"state_dim", cfg.state_dim},
            {"expand", cfg.expand},
            {"resid_channels", cfg.resid_channels},
            {"fmod_channels", cfg.fmod_channels},
            {"input_size", cfg.input_size},
            {"variant", variant_name(cfg.variant)}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.scale = j.at("scale").get<std::string>();
    cfg.embed_dim = j.at("embed_dim").get<std::int64_t>();
    const auto d = j.at("depths").get<std::vector<std::int64_t>>();
    if (d.size() != 4) throw IoError("checkpoint config: depths must have 4 entries");
    std::copy(d.begin(), d.end(), cfg.depths.begin());
    cfg.state_dim = j.at("state_dim").get<std::int64_t>();
    cfg.expand = j.at("expand").get<std::int64_t>();
    cfg.resid_channels = j.at("resid_channels").get<std::int64_t>();
    cfg.fmod_channels = j.at("fmod_channels").get<std::int64_t>();
    cfg.input_size = j.at("input_size").get<std::int64_t>();
    cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    return cfg;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    nlohmann::json header = ck.meta;
    auto& tens = header["tensors"] = nlohmann::json::array();
    for (const auto& t : ck.tensors)
        tens.push_back({{"name", t.name}, {"shape", t.t.shape()}});
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint '" + path + "'");
    f.write("FMCK", 4);
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : ck.tensors)
        f.write(reinterpret_cast<const char*>(t.t.data()),
                static_cast<std::streamsize>(t.t.size() * sizeof(double)));
    if (!f) throw IoError("short write on checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "FMCK", 4) != 0)
        throw IoError("'" + path + "' is not a checkpoint (bad magic)");
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!f || hlen > (1ull << 30)) throw IoError("bad checkpoint header in '" + path + "'");
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw IoError("truncated checkpoint header in '" + path + "'");

    Checkpoint ck;
    try {
        ck.meta = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("unparseable checkpoint header in '" + path + "': " + e.what());
    }
    for (const auto& entry : ck.meta.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<Shape>();
        Tensor t{Shape(shape)};
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!f) throw IoError("truncated tensor '" + name + "' in '" + path + "'");
        ck.tensors.push_back({name, t});
    }
    ck.meta.erase("tensors");
    return ck;
}

void save_model(const std::string& path, const FormaNet& net, nlohmann::json extra_meta,
                const std::vector<NamedParam>& extra_tensors) {
    Checkpoint ck;
    ck.meta = std::move(extra_meta);
    ck.meta["format"] = "forma-checkpoint-v1";
    ck.meta["config"] = config_to_json(net.cfg);
    ck.tensors = net.parameters();
    // The SRM bank is constant, but carrying it makes files self-contained.
    if (has_noise_branch(net.cfg.variant)) ck.tensors.push_back({"noise.srm", net.noise.srm});
    for (const auto& t : extra_tensors) ck.tensors.push_back(t);
    save_checkpoint(path, ck);
}

FormaNet load_model(const std::string& path, Checkpoint* raw) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta.value("format", "") != "forma-checkpoint-v1")
        throw IoError("'" + path + "' is not a model checkpoint");
    FormaNet net = FormaNet::init(0, config_from_json(ck.meta.at("config")));
    auto params = net.parameters();
    for (auto& p : params) {
        bool found = false;
        for (const auto& t : ck.tensors)
            if (t.name == p.name) {
                p.t.copy_from(t.t);
                found = true;
                break;
            }
        if (!found)
            throw IoError("checkpoint '" + path + "' is missing tensor '" + p.name + "'");
    }
    if (raw) *raw = std::move(ck);
    return net;
}

}  // namespace forma
