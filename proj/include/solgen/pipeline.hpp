#pragma once

// Generator configuration, per-record generation for the three data sources,
// deterministic parallel shard writing, replay, evaluation inputs and stats.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "solgen/bp_machine.hpp"
#include "solgen/chomsky_tasks.hpp"
#include "solgen/evaluation.hpp"
#include "solgen/prior_lab.hpp"
#include "solgen/sampling.hpp"
#include "solgen/shard.hpp"
#include "solgen/voms_ctw.hpp"

namespace solgen {

inline constexpr const char* kWorkersEnv = "SLFG_WORKERS";

// Worker count: explicit value, else $SLFG_WORKERS, else hardware threads.
inline unsigned resolve_workers(unsigned requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv(kWorkersEnv)) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct Config {
    GeneratorId generator = GeneratorId::Utm;
    std::uint64_t seed = 0;
    std::uint64_t count = 1000;
    std::uint32_t shard_size = 1000;
    std::uint32_t seq_len = 256;

    // utm
    std::uint32_t steps = 1000;
    std::uint32_t max_output = 0;  // 0: same as seq_len
    std::optional<std::uint32_t> max_program_len;
    PadMode pad = PadMode::Normalized;
    std::string q_table;  // Q table text; empty means uniform

    // voms
    std::uint32_t depth = 24;
    std::vector<double> alphas;

    // chomsky
    std::vector<std::string> tasks;  // empty: all 15, round robin
    std::uint32_t max_input_len = 20;

    RunLimits limits() const { return RunLimits{steps, max_output ? max_output : seq_len, max_program_len}; }

    int alphabet() const {
        switch (generator) {
            case GeneratorId::Utm: return pad == PadMode::Absorbing ? kAlphabetSize + 1 : kAlphabetSize;
            case GeneratorId::Voms: return 2;
            case GeneratorId::Chomsky: return kVocabSize;
        }
        return 0;
    }

    std::vector<TaskId> task_ids() const {
        std::vector<TaskId> ids;
        if (tasks.empty()) {
            for (const auto& t : all_tasks()) ids.push_back(t.id);
        }
        for (const auto& k : tasks) ids.push_back(task_spec(k).id);
        return ids;
    }

    // Canonical JSON (sorted keys); only the fields of this generator.
    std::string to_json() const {
        nlohmann::json j;
        j["generator"] = std::string(generator_name(generator));
        j["seed"] = seed;
        j["count"] = count;
        j["shard_size"] = shard_size;
        j["seq_len"] = seq_len;
        switch (generator) {
            case GeneratorId::Utm:
                j["steps"] = steps;
                j["max_output"] = limits().max_output;
                j["max_program_len"] = max_program_len ? nlohmann::json(*max_program_len) : nlohmann::json(nullptr);
                j["tape_cells"] = kTapeLength;
                j["pad"] = pad == PadMode::Absorbing ? "absorbing" : "normalized";
                j["q_table"] = q_table;
                break;
            case GeneratorId::Voms:
                j["depth"] = depth;
                j["alphas"] = alphas;
                break;
            case GeneratorId::Chomsky:
                j["tasks"] = tasks;
                j["max_input_len"] = max_input_len;
                j["token_table_version"] = kTokenTableVersion;
                break;
        }
        return j.dump();
    }

    static Config from_json(std::string_view text) {
        const auto j = nlohmann::json::parse(text);
        Config c;
        c.generator = generator_from_name(j.at("generator").get<std::string>());
        c.seed = j.at("seed").get<std::uint64_t>();
        c.count = j.at("count").get<std::uint64_t>();
        c.shard_size = j.at("shard_size").get<std::uint32_t>();
        c.seq_len = j.at("seq_len").get<std::uint32_t>();
        switch (c.generator) {
            case GeneratorId::Utm:
                c.steps = j.at("steps").get<std::uint32_t>();
                c.max_output = j.at("max_output").get<std::uint32_t>();
                if (!j.at("max_program_len").is_null()) c.max_program_len = j.at("max_program_len").get<std::uint32_t>();
                c.pad = j.at("pad").get<std::string>() == "absorbing" ? PadMode::Absorbing : PadMode::Normalized;
                c.q_table = j.at("q_table").get<std::string>();
                break;
            case GeneratorId::Voms:
                c.depth = j.at("depth").get<std::uint32_t>();
                c.alphas = j.at("alphas").get<std::vector<double>>();
                break;
            case GeneratorId::Chomsky:
                c.tasks = j.at("tasks").get<std::vector<std::string>>();
                c.max_input_len = j.at("max_input_len").get<std::uint32_t>();
                break;
        }
        return c;
    }

    std::uint64_t digest() const { return config_digest(to_json()); }

    std::uint64_t shard_count() const { return shard_size == 0 ? 0 : (count + shard_size - 1) / shard_size; }
};

inline std::uint64_t shard_seed(std::uint64_t base, std::uint64_t shard_index) { return derive_seed(base, shard_index); }

inline std::uint64_t record_seed(std::uint64_t base, std::uint64_t shard_index, std::uint64_t record_index) {
    return derive_seed(shard_seed(base, shard_index), record_index);
}

// --- ground-truth payloads -----------------------------------------------

struct UtmTruth {
    std::string program;  // generated cells, '{' included
    std::uint32_t shortened_len = 0;
    std::uint32_t steps = 0;
};

inline std::vector<std::uint8_t> encode_utm_truth(const UtmTruth& t) {
    ByteWriter w;
    w.str(t.program);
    w.u32(t.shortened_len);
    w.u32(t.steps);
    return w.take();
}

inline UtmTruth decode_utm_truth(std::span<const std::uint8_t> b) {
    ByteReader rd(b, "payload");
    UtmTruth t;
    t.program = rd.str();
    t.shortened_len = rd.u32();
    t.steps = rd.u32();
    return t;
}

inline std::vector<std::uint8_t> encode_tree(const SuffixTree& tree) {
    ByteWriter w;
    w.u32(tree.max_depth());
    w.u32(static_cast<std::uint32_t>(tree.leaf_count()));
    for (const auto& l : tree.leaves()) {
        w.u32(l.depth);
        w.u32(l.bits);
        w.f64(l.theta);
    }
    return w.take();
}

inline SuffixTree decode_tree(std::span<const std::uint8_t> b) {
    ByteReader rd(b, "payload");
    const std::uint32_t depth = rd.u32();
    const std::uint32_t n = rd.u32();
    std::vector<VomsLeaf> leaves;
    for (std::uint32_t i = 0; i < n; ++i) {
        VomsLeaf l;
        l.depth = rd.u32();
        l.bits = rd.u32();
        l.theta = rd.f64();
        leaves.push_back(l);
    }
    return SuffixTree(depth, std::move(leaves));
}

struct ChomskyTruth {
    TaskId task = TaskId::EvenPairs;
    std::uint32_t episodes = 0;
};

inline std::vector<std::uint8_t> encode_chomsky_truth(const ChomskyTruth& t) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(t.task));
    w.u32(t.episodes);
    return w.take();
}

inline ChomskyTruth decode_chomsky_truth(std::span<const std::uint8_t> b) {
    ByteReader rd(b, "payload");
    ChomskyTruth t;
    const std::uint32_t id = rd.u32();
    if (id >= kNumTasks) throw ShardError("payload", "unknown task id " + std::to_string(id));
    t.task = static_cast<TaskId>(id);
    t.episodes = rd.u32();
    return t;
}

// --- record generation ---------------------------------------------------

class RecordGenerator {
public:
    explicit RecordGenerator(Config cfg) : cfg_(std::move(cfg)) {
        if (cfg_.generator == GeneratorId::Utm) {
            if (cfg_.q_table.empty()) {
                q_ = ProgramDistribution::uniform();
            } else {
                std::istringstream in(cfg_.q_table);
                q_ = ProgramDistribution::read(in);
            }
        }
        if (cfg_.generator == GeneratorId::Chomsky) task_ids_ = cfg_.task_ids();
    }

    const Config& config() const noexcept { return cfg_; }

    // The task a record gets from its position in the whole set.
    TaskId task_for(std::uint64_t global_index) const { return task_ids_[global_index % task_ids_.size()]; }

    ShardRecord make(std::uint64_t seed, std::optional<TaskId> task = std::nullopt) const {
        Rng rng(seed);
        ShardRecord rec;
        rec.seed = seed;
        switch (cfg_.generator) {
            case GeneratorId::Utm: {
                const RunLimits lim = cfg_.limits();
                const RunResult run = sample_and_run(q_, lim, rng);
                const PaddedRecord p = pad_record(run.output, cfg_.seq_len, cfg_.pad);
                rec.tokens = p.tokens;
                rec.mask = p.mask;
                rec.real_len = p.real_len;
                const ShortenedProgram sp = shorten(run.program, lim);
                rec.extra = encode_utm_truth({run.program.text(), sp.shortened_len, run.steps});
                break;
            }
            case GeneratorId::Voms: {
                const SuffixTree tree = sample_tree(cfg_.depth, cfg_.alphas, rng);
                const VomsSequence seq = sample_sequence(tree, cfg_.seq_len, rng);
                rec.tokens = seq.bits;
                rec.mask.assign(seq.bits.size(), 1);
                rec.real_len = cfg_.seq_len;
                rec.extra = encode_tree(tree);
                break;
            }
            case GeneratorId::Chomsky: {
                const TaskId id = task.value_or(task_ids_.front());
                const EpisodeRecord ep = assemble_sequence(task_spec(id), cfg_.seq_len, rng, cfg_.max_input_len);
                rec.tokens = ep.tokens;
                rec.mask = ep.mask;
                rec.real_len = cfg_.seq_len;
                rec.extra = encode_chomsky_truth({id, ep.episodes});
                break;
            }
        }
        return rec;
    }

    std::vector<ShardRecord> make_shard(std::uint64_t shard_index) const {
        const std::uint64_t first = shard_index * cfg_.shard_size;
        const std::uint64_t n = std::min<std::uint64_t>(cfg_.shard_size, cfg_.count - first);
        std::vector<ShardRecord> records;
        records.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            std::optional<TaskId> task;
            if (cfg_.generator == GeneratorId::Chomsky) task = task_for(first + i);
            records.push_back(make(record_seed(cfg_.seed, shard_index, i), task));
        }
        return records;
    }

private:
    Config cfg_;
    ProgramDistribution q_;
    std::vector<TaskId> task_ids_;
};

// Regenerates the record from its seed and compares bytes; UTM records also
// re-run the stored program and compare its output with the tokens.
inline std::optional<std::string> replay_record(const ShardHeader& h, std::uint64_t /*index*/, const ShardRecord& rec) {
    const Config cfg = Config::from_json(h.config_json);
    if (cfg.generator != h.generator) return "config generator differs from header";
    const RecordGenerator gen(cfg);
    std::optional<TaskId> task;
    if (cfg.generator == GeneratorId::Chomsky) task = decode_chomsky_truth(rec.extra).task;
    if (cfg.generator == GeneratorId::Utm) {
        const UtmTruth t = decode_utm_truth(rec.extra);
        const RunResult run = replay_generated(t.program, cfg.limits());
        const PaddedRecord p = pad_record(run.output, cfg.seq_len, cfg.pad);
        if (p.tokens != rec.tokens) return "stored program does not reproduce the tokens";
    }
    if (gen.make(rec.seed, task) != rec) return "regenerating from the seed gives different bytes";
    return std::nullopt;
}

inline VerifyReport verify_shard(const std::filesystem::path& path, std::size_t replay_samples = 16) {
    VerifyReport rep;
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file(path);
    } catch (const std::exception& e) {
        rep.path = path;
        rep.checks.push_back({"open", false, e.what()});
        return rep;
    }
    rep = verify_shard_bytes(bytes, replay_record, replay_samples);
    rep.path = path;
    return rep;
}

// --- shard sets ----------------------------------------------------------

inline std::filesystem::path shard_path(const std::filesystem::path& dir, GeneratorId g, std::uint64_t index) {
    char name[64];
    std::snprintf(name, sizeof name, "%s-%05llu.slfg", std::string(generator_name(g)).c_str(),
                  static_cast<unsigned long long>(index));
    return dir / name;
}

inline void write_manifest(const std::filesystem::path& shard, const Config& cfg, std::uint64_t index,
                           std::span<const std::uint8_t> bytes, std::uint64_t records) {
    const HeaderView hv = decode_header(bytes);
    std::ofstream out(shard.string() + ".manifest", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest for " + shard.string());
    char hex[32];
    out << "format\tSLFG\n" << "version\t" << kShardVersion << '\n';
    out << "generator\t" << generator_name(cfg.generator) << '\n';
    out << "shard_index\t" << index << '\n';
    out << "records\t" << records << '\n';
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hv.header.config_digest));
    out << "config_digest\t" << hex << '\n';
    std::snprintf(hex, sizeof hex, "%08x", hv.header.crc32);
    out << "crc32\t" << hex << '\n';
    out << "bytes\t" << bytes.size() << '\n';
    out << "config\t" << cfg.to_json() << '\n';
}

// Writes shard i of the set (records shard_size*i ...) plus its manifest.
inline std::filesystem::path write_shard(const RecordGenerator& gen, const std::filesystem::path& dir,
                                         std::uint64_t index) {
    const Config& cfg = gen.config();
    const auto records = gen.make_shard(index);
    const auto bytes = encode_shard(cfg.generator, cfg.to_json(), records);
    const auto path = shard_path(dir, cfg.generator, index);
    write_file(path, bytes);
    write_manifest(path, cfg, index, bytes, records.size());
    return path;
}

// Worker pool over shard indices; shards share nothing, so the files do
// not depend on the worker count.
inline std::vector<std::filesystem::path> generate_shards(const Config& cfg, const std::filesystem::path& dir,
                                                          unsigned workers = 0) {
    if (cfg.shard_size == 0) throw std::invalid_argument("shard_size must be positive");
    std::filesystem::create_directories(dir);
    const RecordGenerator gen(cfg);
    const std::uint64_t n = cfg.shard_count();
    std::vector<std::filesystem::path> paths(n);
    std::atomic<std::uint64_t> next{0};
    workers = static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(workers), std::max<std::uint64_t>(n, 1)));
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&] {
            for (std::uint64_t i = next++; i < n; i = next++) paths[i] = write_shard(gen, dir, i);
        }));
    }
    for (auto& j : jobs) j.get();
    return paths;
}

// --- evaluation inputs ---------------------------------------------------

struct EvalBatch {
    Config config;
    std::vector<EvalSequence> sequences;
    std::vector<std::uint32_t> shortened_lengths;  // utm only
};

inline void append_eval_sequences(const Shard& shard, EvalBatch& batch) {
    const Config cfg = Config::from_json(shard.header.config_json);
    batch.config = cfg;
    for (const auto& rec : shard.records) {
        EvalSequence s;
        s.seed = rec.seed;
        s.alphabet = cfg.alphabet();
        s.tokens = rec.tokens;
        s.mask = rec.mask;
        s.mu.assign(rec.tokens.size(), 1.0);
        switch (cfg.generator) {
            case GeneratorId::Utm: {
                const UtmTruth t = decode_utm_truth(rec.extra);
                const auto len = run_stream(t.program, cfg.limits()).program.size();
                s.groups.push_back({"program_length", std::to_string(len)});
                batch.shortened_lengths.push_back(t.shortened_len);
                break;
            }
            case GeneratorId::Voms: {
                const SuffixTree tree = decode_tree(rec.extra);
                for (std::size_t t = 0; t < rec.tokens.size(); ++t) {
                    const double p0 = tree.find_leaf(rec.tokens, t).theta;
                    s.mu[t] = rec.tokens[t] == 0 ? p0 : 1.0 - p0;
                }
                s.groups.push_back({"tree_depth", std::to_string(tree.depth())});
                s.groups.push_back({"leaves", std::to_string(tree.leaf_count())});
                break;
            }
            case GeneratorId::Chomsky:
                s.groups.push_back({"task", std::string(task_spec(decode_chomsky_truth(rec.extra).task).key)});
                break;
        }
        batch.sequences.push_back(std::move(s));
    }
}

inline EvalBatch load_eval_batch(std::span<const std::filesystem::path> shards) {
    EvalBatch batch;
    std::optional<std::uint64_t> digest;
    for (const auto& p : shards) {
        const Shard s = read_shard(p);
        if (digest && *digest != s.header.config_digest) {
            throw std::invalid_argument("eval: " + p.string() + " belongs to a different configuration");
        }
        digest = s.header.config_digest;
        append_eval_sequences(s, batch);
    }
    return batch;
}

inline RegretReport evaluate_batch(const EvalBatch& batch, const std::string& baseline, bool bits = false,
                                   unsigned workers = 0) {
    RegretReport rep;
    if (batch.sequences.empty()) {
        make_baseline(baseline, 2);  // still reject unknown names
        rep.predictor = baseline;
    } else {
        rep = evaluate_suite(baseline, batch.sequences.front().alphabet, batch.sequences, resolve_workers(workers));
    }
    rep.bits = bits;
    if (batch.config.generator == GeneratorId::Utm && !batch.sequences.empty()) {
        rep.solomonoff_ub = solomonoff_upper_bound(batch.shortened_lengths);
    }
    return rep;
}

// --- Q training ----------------------------------------------------------

struct YieldCount {
    std::uint64_t samples = 0;
    std::uint64_t interesting = 0;
    std::vector<std::vector<Op>> shortened;  // shortened streams of the interesting ones, in sample order

    double fraction() const { return samples ? static_cast<double>(interesting) / static_cast<double>(samples) : 0.0; }
};

// Draws `samples` programs from `dist` (sample i seeded by derive_seed(seed, i))
// and counts interesting outputs; keeps shortened streams when asked.
template <InstructionDistribution D>
YieldCount interesting_yield(const D& dist, const RunLimits& limits, std::uint64_t samples, std::uint64_t seed,
                             const InterestFilter& filter, bool keep_shortened, unsigned workers = 0) {
    workers = static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(workers), std::max<std::uint64_t>(samples, 1)));
    std::vector<std::vector<std::pair<std::uint64_t, std::vector<Op>>>> parts(workers);
    std::vector<std::uint64_t> hits(workers, 0);
    std::vector<std::future<void>> jobs;
    for (unsigned k = 0; k < workers; ++k) {
        jobs.push_back(std::async(std::launch::async, [&, k] {
            for (std::uint64_t i = k; i < samples; i += workers) {
                Rng rng(derive_seed(seed, i));
                const RunResult run = sample_and_run(dist, limits, rng);
                if (!is_interesting(run.output, filter)) continue;
                ++hits[k];
                if (keep_shortened) parts[k].emplace_back(i, shorten(run.program, limits).program.stream());
            }
        }));
    }
    for (auto& j : jobs) j.get();
    YieldCount y;
    y.samples = samples;
    std::vector<std::pair<std::uint64_t, std::vector<Op>>> all;
    for (unsigned k = 0; k < workers; ++k) {
        y.interesting += hits[k];
        for (auto& e : parts[k]) all.push_back(std::move(e));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& e : all) y.shortened.push_back(std::move(e.second));
    return y;
}

struct QTraining {
    ProgramDistribution q;
    YieldCount uniform;
};

// Uniform draws, filter, shorten, fit a Markov Q of the given order.
inline QTraining train_q(std::uint64_t samples, std::uint64_t seed, int order, double smoothing, const RunLimits& limits,
                         const InterestFilter& filter, unsigned workers = 0) {
    QTraining t;
    t.uniform = interesting_yield(ProgramDistribution::uniform(), limits, samples, seed, filter, true, workers);
    t.q = fit_markov_q(t.uniform.shortened, order, smoothing);
    return t;
}

// --- statistics ----------------------------------------------------------

struct ShardStats {
    std::uint64_t records = 0;
    std::map<std::string, std::map<long long, std::uint64_t>> histograms;
    std::uint64_t interesting = 0;

    void write(std::ostream& os) const {
        os << "records\t" << records << '\n';
        if (histograms.count("program_length")) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6g", records ? static_cast<double>(interesting) / static_cast<double>(records) : 0.0);
            os << "interesting_fraction\t" << buf << '\n';
        }
        for (const auto& [name, h] : histograms) {
            for (const auto& [k, v] : h) os << "hist\t" << name << '\t' << k << '\t' << v << '\n';
        }
    }
};

inline void accumulate_stats(const Shard& shard, ShardStats& st, const InterestFilter& filter = {}) {
    const Config cfg = Config::from_json(shard.header.config_json);
    for (const auto& rec : shard.records) {
        ++st.records;
        switch (cfg.generator) {
            case GeneratorId::Utm: {
                const UtmTruth t = decode_utm_truth(rec.extra);
                const auto run = run_stream(t.program, cfg.limits());
                ++st.histograms["program_length"][static_cast<long long>(run.program.size())];
                ++st.histograms["shortened_length"][t.shortened_len];
                ++st.histograms["output_length"][rec.real_len];
                st.interesting += is_interesting(run.output, filter);
                break;
            }
            case GeneratorId::Voms: {
                const SuffixTree tree = decode_tree(rec.extra);
                ++st.histograms["tree_depth"][tree.depth()];
                ++st.histograms["leaves"][static_cast<long long>(tree.leaf_count())];
                break;
            }
            case GeneratorId::Chomsky: {
                const ChomskyTruth t = decode_chomsky_truth(rec.extra);
                ++st.histograms["task"][static_cast<long long>(t.task)];
                ++st.histograms["episodes"][t.episodes];
                break;
            }
        }
    }
}

}  // namespace solgen
