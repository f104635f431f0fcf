#include "lightgrad/bench.hpp"

#include <sys/resource.h>

#include <chrono>
#include <sstream>

namespace lightgrad {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_rss_mb() {
    rusage u{};
    getrusage(RUSAGE_SELF, &u);
    return static_cast<double>(u.ru_maxrss) / 1024.0;  // ru_maxrss is KB on Linux
}

struct Measured {
    double latency_s = 0.0;
    double audio_s = 0.0;
    double first_chunk_s = 0.0;
    double peak_mem_mb = 0.0;
};

template <typename RunFn>
Measured measure(const std::vector<std::vector<int>>& utterances, int repeats, RunFn&& run) {
    // 1 warm-up + mean of `repeats` runs per utterance
    run(utterances.front(), nullptr);
    const double rss_before = max_rss_mb();
    Measured m;
    for (const auto& utt : utterances) {
        for (int r = 0; r < repeats; ++r) {
            double first = 0.0;
            const auto t0 = Clock::now();
            const int frames = run(utt, &first);
            m.latency_s += seconds_since(t0);
            m.first_chunk_s += first;
            if (r == 0) m.audio_s += frames_to_seconds(frames);
        }
    }
    const double n = static_cast<double>(utterances.size()) * repeats;
    m.latency_s /= n;
    m.first_chunk_s /= n;
    m.audio_s /= static_cast<double>(utterances.size());
    m.peak_mem_mb = max_rss_mb() - rss_before;  // approximate: monotone high-water mark
    return m;
}

}  // namespace

BenchReport bench(const TtsModel& model, const NoiseSchedule& sched,
                  const std::vector<std::vector<int>>& utterances,
                  const BenchOptions& opt) {
    require(!utterances.empty(), "bench: no utterances");
    BenchReport report;
    report.protocol = "single thread, 1 warm-up + mean of " + std::to_string(opt.repeats) +
                      " runs per utterance";
    const int64_t params = model.param_count();

    auto make_flags = [&](int nfe) {
        SynthFlags f;
        f.nfe = nfe;
        f.tau = opt.tau;
        f.seed = opt.seed;
        f.method = SamplerMethod::dpm_solver1;
        return f;
    };

    for (int nfe : {opt.nfe_slow, opt.nfe_fast}) {
        const SynthFlags flags = make_flags(nfe);
        const Measured m = measure(utterances, opt.repeats,
                                   [&](const std::vector<int>& utt, double*) {
                                       return synth(model, sched, utt, flags).mel.n_frames;
                                   });
        BenchRow row;
        row.system = "non-streaming";
        row.nfe = nfe;
        row.latency_s = m.latency_s;
        row.audio_s = m.audio_s;
        row.rtf = m.latency_s / m.audio_s;
        row.peak_mem_mb = m.peak_mem_mb;
        row.params = params;
        report.rows.push_back(row);
    }

    {
        const SynthFlags flags = make_flags(opt.nfe_fast);
        const Measured m =
            measure(utterances, opt.repeats, [&](const std::vector<int>& utt, double* first) {
                const auto t0 = Clock::now();
                bool got_first = false;
                ChunkCallback<float> cb = [&](int, int, int, const Mel&) {
                    if (!got_first) {
                        if (first) *first = seconds_since(t0);
                        got_first = true;
                    }
                };
                return synth_streaming(model, sched, utt, flags, nullptr, cb).mel.n_frames;
            });
        BenchRow row;
        row.system = "streaming";
        row.nfe = opt.nfe_fast;
        row.latency_s = m.latency_s;
        row.audio_s = m.audio_s;
        row.rtf = m.latency_s / m.audio_s;
        row.first_chunk_s = m.first_chunk_s;
        row.peak_mem_mb = m.peak_mem_mb;
        row.params = params;
        report.rows.push_back(row);
    }
    return report;
}

std::string BenchReport::table() const {
    std::ostringstream os;
    os << "# " << protocol << "\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %4s %12s %10s %10s %14s %12s\n", "system", "nfe",
                  "latency(s)", "rtf", "audio(s)", "first-chunk(s)", "params");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-14s %4d %12.4f %10.4f %10.3f %14.4f %12lld\n",
                      r.system.c_str(), r.nfe, r.latency_s, r.rtf, r.audio_s, r.first_chunk_s,
                      static_cast<long long>(r.params));
        os << line;
    }
    return os.str();
}

std::string BenchReport::csv() const {
    std::ostringstream os;
    os << "system,nfe,latency_s,rtf,audio_s,first_chunk_s,peak_mem_mb,params\n";
    for (const auto& r : rows)
        os << r.system << "," << r.nfe << "," << r.latency_s << "," << r.rtf << ","
           << r.audio_s << "," << r.first_chunk_s << "," << r.peak_mem_mb << "," << r.params
           << "\n";
    return os.str();
}

}  // namespace lightgrad
