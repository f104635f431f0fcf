#include "lightgrad/corpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lightgrad/config.hpp"
#include "lightgrad/melfile.hpp"
#include "lightgrad/rng.hpp"

namespace fs = std::filesystem;

namespace lightgrad {

std::vector<float> phoneme_template(int id, int n_mels) {
    require(id >= 1 && id <= kToyVocab, "phoneme_template: id out of range");
    std::vector<float> col(static_cast<size_t>(n_mels));
    const double peak = (id - 0.5) * n_mels / kToyVocab;
    const double width = std::max(0.75, n_mels / 20.0);
    const double amp = 6.0;
    const double floor_db = -4.0;
    for (int m = 0; m < n_mels; ++m) {
        const double d = (m - peak) / width;
        col[static_cast<size_t>(m)] =
            static_cast<float>(floor_db + amp * std::exp(-0.5 * d * d));
    }
    return col;
}

std::pair<int, int> phoneme_duration_range(int id) {
    require(id >= 1 && id <= kToyVocab, "phoneme_duration_range: id out of range");
    const int lo = 3 + id % 3;
    return {lo, lo + 3};
}

Mel template_mel(const std::vector<int>& phonemes, const std::vector<int>& durations,
                 int n_mels) {
    require(phonemes.size() == durations.size(), "template_mel: length mismatch");
    int frames = 0;
    for (int d : durations) frames += d;
    Mel mel(n_mels, frames);
    int f = 0;
    for (size_t p = 0; p < phonemes.size(); ++p) {
        const auto col = phoneme_template(phonemes[p], n_mels);
        for (int r = 0; r < durations[p]; ++r, ++f)
            for (int m = 0; m < n_mels; ++m) mel.at(m, f) = col[static_cast<size_t>(m)];
    }
    return mel;
}

void gen_toy_corpus(const ToyCorpusConfig& cfg, const std::string& out_dir) {
    require(cfg.n_utts >= 1 && cfg.min_len >= 1 && cfg.min_len <= cfg.max_len,
            "gen_toy_corpus: invalid config");
    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "mels");
    if (!fs::is_directory(out_dir))
        throw format_error("gen_toy_corpus: cannot create directory " + out_dir);

    {
        std::ofstream ph(fs::path(out_dir) / "phonemes.txt", std::ios::trunc);
        if (!ph) throw format_error("gen_toy_corpus: cannot write phonemes.txt");
        for (int id = 1; id <= kToyVocab; ++id) ph << "p" << id << "\n";
    }
    {
        Config meta;
        meta.set("n_mels", std::to_string(cfg.n_mels));
        meta.set("n_utts", std::to_string(cfg.n_utts));
        meta.set("seed", std::to_string(cfg.seed));
        meta.set("noise_sd", std::to_string(cfg.noise_sd));
        std::ofstream mf(fs::path(out_dir) / "corpus.cfg", std::ios::trunc);
        mf << meta.dump();
    }

    std::ofstream tr(fs::path(out_dir) / "transcript.txt", std::ios::trunc);
    if (!tr) throw format_error("gen_toy_corpus: cannot write transcript.txt");

    for (int u = 0; u < cfg.n_utts; ++u) {
        Rng rng = Rng::fork(cfg.seed, 0xc0000000ull + static_cast<uint64_t>(u));
        const int len = rng.uniform_int(cfg.min_len, cfg.max_len);
        std::vector<int> phonemes(static_cast<size_t>(len));
        std::vector<int> durations(static_cast<size_t>(len));
        for (int i = 0; i < len; ++i) {
            phonemes[static_cast<size_t>(i)] = rng.uniform_int(1, kToyVocab);
            const auto [lo, hi] = phoneme_duration_range(phonemes[static_cast<size_t>(i)]);
            durations[static_cast<size_t>(i)] = rng.uniform_int(lo, hi);
        }
        Mel mel = template_mel(phonemes, durations, cfg.n_mels);
        for (auto& v : mel.data)
            v += static_cast<float>(rng.gaussian() * cfg.noise_sd);

        char id[32];
        std::snprintf(id, sizeof(id), "utt%04d", u);
        write_mel_file((fs::path(out_dir) / "mels" / (std::string(id) + ".mel")).string(), mel);
        tr << id << "|";
        for (int i = 0; i < len; ++i)
            tr << (i ? " " : "") << "p" << phonemes[static_cast<size_t>(i)];
        tr << "\n";
    }
    if (!tr) throw format_error("gen_toy_corpus: transcript write failed");
}

std::string Corpus::mel_path(const std::string& utt_id) const {
    return (fs::path(dir) / "mels" / (utt_id + ".mel")).string();
}

Mel Corpus::load_mel(size_t utt_index) const {
    return read_mel_file(mel_path(utts.at(utt_index).id));
}

Corpus load_corpus(const std::string& dirname) {
    Corpus c;
    c.dir = dirname;

    {
        std::ifstream ph(fs::path(dirname) / "phonemes.txt");
        if (!ph) throw format_error("corpus: missing phonemes.txt in " + dirname);
        std::string tok;
        while (std::getline(ph, tok)) {
            if (!tok.empty() && tok.back() == '\r') tok.pop_back();
            if (!tok.empty()) c.tokens.push_back(tok);
        }
        if (c.tokens.empty()) throw format_error("corpus: empty phoneme inventory");
    }

    const Config meta = Config::load((fs::path(dirname) / "corpus.cfg").string());
    c.n_mels = meta.get_int("n_mels", 80);

    std::ifstream tr(fs::path(dirname) / "transcript.txt");
    if (!tr) throw format_error("corpus: missing transcript.txt in " + dirname);
    std::string line;
    int lineno = 0;
    while (std::getline(tr, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto bar = line.find('|');
        if (bar == std::string::npos)
            throw format_error("transcript line " + std::to_string(lineno) +
                               ": expected 'utt_id|tokens'");
        Utterance u;
        u.id = line.substr(0, bar);
        std::istringstream toks(line.substr(bar + 1));
        std::string tok;
        while (toks >> tok) {
            int id = 0;
            for (size_t i = 0; i < c.tokens.size(); ++i)
                if (c.tokens[i] == tok) {
                    id = static_cast<int>(i) + 1;
                    break;
                }
            if (id == 0)
                throw format_error("transcript line " + std::to_string(lineno) +
                                   ": unknown phoneme token '" + tok + "'");
            u.phonemes.push_back(id);
        }
        if (u.phonemes.empty())
            throw format_error("transcript line " + std::to_string(lineno) +
                               ": utterance without phonemes");
        c.utts.push_back(std::move(u));
    }
    return c;
}

}  // namespace lightgrad
