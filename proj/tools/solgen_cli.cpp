// solgen: generate, verify and evaluate algorithmic-data shards.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "solgen/pipeline.hpp"

namespace fs = std::filesystem;
using namespace solgen;

namespace {

struct CommonGen {
    std::uint64_t count = 1000;
    std::uint64_t seed = 0;
    std::uint32_t len = 256;
    std::uint32_t shard_size = 1000;
    unsigned workers = 0;
    std::string out = "shards";
};

void add_common(CLI::App* cmd, CommonGen& c) {
    cmd->add_option("--count", c.count, "Number of sequences")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Base seed")->capture_default_str();
    cmd->add_option("--len", c.len, "Sequence length")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--shard-size", c.shard_size, "Records per shard")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--workers", c.workers, "Worker threads (default: $SLFG_WORKERS or all cores)");
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

void apply_common(Config& cfg, const CommonGen& c) {
    cfg.count = c.count;
    cfg.seed = c.seed;
    cfg.seq_len = c.len;
    cfg.shard_size = c.shard_size;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to `path`, or stdout when it is empty or "-".
template <class F>
void emit(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    write(out);
}

void report_generated(const std::vector<fs::path>& paths, const Config& cfg) {
    std::printf("wrote %zu shard(s), %llu records, config digest %016llx\n", paths.size(),
                static_cast<unsigned long long>(cfg.count), static_cast<unsigned long long>(cfg.digest()));
    for (const auto& p : paths) std::printf("  %s\n", p.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"solgen: algorithmic sequence data (UTM, VOMS, Chomsky tasks) and baselines"};
    app.require_subcommand(1);

    // generate-utm
    CommonGen utm_c;
    std::uint32_t utm_steps = 1000, utm_max_output = 0, utm_max_len = 0;
    std::string utm_pad = "normalized", utm_q;
    auto* utm = app.add_subcommand("generate-utm", "Sample BrainPhoque programs and write output shards");
    add_common(utm, utm_c);
    utm->add_option("--steps", utm_steps, "Step budget s")->capture_default_str();
    utm->add_option("--max-output", utm_max_output, "Output budget n (default: --len)");
    utm->add_option("--max-program-len", utm_max_len, "Program length budget L (default: none)");
    utm->add_option("--pad", utm_pad, "Padding mode")->check(CLI::IsMember({"normalized", "absorbing"}))->capture_default_str();
    utm->add_option("--q", utm_q, "Q table file (default: uniform)")->check(CLI::ExistingFile);

    // generate-voms
    CommonGen voms_c;
    std::uint32_t voms_depth = 24;
    std::vector<double> voms_alpha;
    auto* voms = app.add_subcommand("generate-voms", "Sample variable-order Markov sources and sequences");
    add_common(voms, voms_c);
    voms->add_option("--depth", voms_depth, "Maximum tree depth D")->capture_default_str();
    voms->add_option("--alpha", voms_alpha, "Split probability per level (default 0.5)");

    // generate-chomsky
    CommonGen ch_c;
    std::vector<std::string> ch_tasks;
    std::uint32_t ch_max_in = 20;
    auto* chomsky = app.add_subcommand("generate-chomsky", "Episodic sequences of the algorithmic tasks");
    add_common(chomsky, ch_c);
    chomsky->add_option("--task", ch_tasks, "Task key(s); default: all 15, round robin");
    chomsky->add_option("--max-input-len", ch_max_in, "Maximum episode input length")->capture_default_str();
    chomsky->add_flag_callback("--list-tasks", [] {
        for (const auto& t : all_tasks()) std::printf("%-28s %-4s %s\n", std::string(t.key).c_str(),
                                                      std::string(level_name(t.level)).c_str(),
                                                      std::string(t.name).c_str());
        std::exit(0);
    }, "Print the task table and exit");
    chomsky->add_flag_callback("--token-table", [] {
        TokenVocab::write_table(std::cout);
        std::exit(0);
    }, "Print the token table and exit");

    // eval
    std::vector<std::string> eval_shards;
    std::string eval_baseline = "uniform", eval_report, eval_summary;
    bool eval_bits = false;
    unsigned eval_workers = 0;
    auto* eval = app.add_subcommand("eval", "Regret report of a baseline predictor on a shard set");
    eval->add_option("shards", eval_shards, "Shard files of one configuration")->required()->check(CLI::ExistingFile);
    eval->add_option("--baseline", eval_baseline, "uniform | ctw(D) | kt(k)")->capture_default_str();
    eval->add_option("--report", eval_report, "Per-sequence TSV output");
    eval->add_option("--summary", eval_summary, "Aggregate summary output (default: stdout)");
    eval->add_flag("--bits", eval_bits, "Report in bits instead of nats");
    eval->add_option("--workers", eval_workers, "Worker threads");

    // oracle
    OracleConfig ocfg;
    std::string oracle_out;
    auto* oracle = app.add_subcommand("oracle", "Exact enumeration of M_{s,L,n}");
    oracle->add_option("--steps", ocfg.steps, "Step budget s")->capture_default_str();
    oracle->add_option("--max-program-len,-L", ocfg.max_program_len, "Program length budget L")->capture_default_str();
    oracle->add_option("--max-output,-n", ocfg.max_output, "Output budget n")->capture_default_str();
    oracle->add_option("--guard", ocfg.guard, "Refuse L above this")->capture_default_str();
    oracle->add_option("--out", oracle_out, "Output file (default: stdout)");

    // train-q
    std::uint64_t tq_samples = 1000000, tq_seed = 0;
    int tq_order = 2;
    double tq_smoothing = 0.01;
    std::uint32_t tq_steps = 1000, tq_n = 256;
    InterestFilter tq_filter;
    std::string tq_out = "q.tsv";
    unsigned tq_workers = 0;
    auto* trainq = app.add_subcommand("train-q", "Fit a Markov program distribution on interesting programs");
    trainq->add_option("--samples", tq_samples, "Uniform programs to draw")->capture_default_str();
    trainq->add_option("--seed", tq_seed, "Seed")->capture_default_str();
    trainq->add_option("--order", tq_order, "Markov order")->capture_default_str();
    trainq->add_option("--smoothing", tq_smoothing, "Additive smoothing (> 0)")->capture_default_str();
    trainq->add_option("--steps", tq_steps, "Step budget s")->capture_default_str();
    trainq->add_option("--max-output", tq_n, "Output budget n")->capture_default_str();
    trainq->add_option("--min-len", tq_filter.min_len, "Filter: minimum output length")->capture_default_str();
    trainq->add_option("--max-period", tq_filter.max_period, "Filter: longest boring period")->capture_default_str();
    trainq->add_option("--out", tq_out, "Q table output")->capture_default_str();
    trainq->add_option("--workers", tq_workers, "Worker threads");

    // shorten
    std::string sh_program;
    std::uint32_t sh_steps = 1000, sh_n = 256;
    auto* shorten_cmd = app.add_subcommand("shorten", "Shorten a generated program stream");
    shorten_cmd->add_option("program", sh_program, "Instruction stream, e.g. '+-.'")->required();
    shorten_cmd->add_option("--steps", sh_steps, "Step budget s")->capture_default_str();
    shorten_cmd->add_option("--max-output", sh_n, "Output budget n")->capture_default_str();

    // stats
    std::vector<std::string> st_shards;
    auto* stats = app.add_subcommand("stats", "Histograms over a shard set");
    stats->add_option("shards", st_shards, "Shard files")->required()->check(CLI::ExistingFile);

    // verify
    std::vector<std::string> vf_shards;
    std::size_t vf_samples = 16;
    auto* verify = app.add_subcommand("verify", "Validate shard files");
    verify->add_option("shards", vf_shards, "Shard files")->required();
    verify->add_option("--replay-samples", vf_samples, "Records replayed per shard")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*utm) {
            Config cfg;
            cfg.generator = GeneratorId::Utm;
            apply_common(cfg, utm_c);
            cfg.steps = utm_steps;
            cfg.max_output = utm_max_output;
            if (utm_max_len) cfg.max_program_len = utm_max_len;
            cfg.pad = utm_pad == "absorbing" ? PadMode::Absorbing : PadMode::Normalized;
            if (!utm_q.empty()) {
                cfg.q_table = slurp(utm_q);
                std::istringstream in(cfg.q_table);
                const auto rep = check_universality_conditions(ProgramDistribution::read(in));
                if (!rep.ok) std::fprintf(stderr, "warning: Q table fails %s\n", rep.failed_condition.c_str());
            }
            report_generated(generate_shards(cfg, utm_c.out, utm_c.workers), cfg);
        } else if (*voms) {
            Config cfg;
            cfg.generator = GeneratorId::Voms;
            apply_common(cfg, voms_c);
            cfg.depth = voms_depth;
            cfg.alphas = voms_alpha;
            report_generated(generate_shards(cfg, voms_c.out, voms_c.workers), cfg);
        } else if (*chomsky) {
            Config cfg;
            cfg.generator = GeneratorId::Chomsky;
            apply_common(cfg, ch_c);
            cfg.tasks = ch_tasks;
            cfg.max_input_len = ch_max_in;
            cfg.task_ids();  // rejects unknown task keys before any work
            report_generated(generate_shards(cfg, ch_c.out, ch_c.workers), cfg);
        } else if (*eval) {
            std::vector<fs::path> paths(eval_shards.begin(), eval_shards.end());
            const EvalBatch batch = load_eval_batch(paths);
            const RegretReport rep = evaluate_batch(batch, eval_baseline, eval_bits, eval_workers);
            if (!eval_report.empty()) emit(eval_report, [&](std::ostream& os) { rep.write_tsv(os); });
            emit(eval_summary, [&](std::ostream& os) { rep.write_summary(os); });
        } else if (*oracle) {
            const PriorTable table = enumerate_prior(ocfg);
            emit(oracle_out, [&](std::ostream& os) { table.write(os); });
        } else if (*trainq) {
            const RunLimits lim{tq_steps, tq_n, std::nullopt};
            const QTraining t = train_q(tq_samples, tq_seed, tq_order, tq_smoothing, lim, tq_filter, tq_workers);
            t.q.save(tq_out);
            std::printf("interesting programs: %llu of %llu (%.4g%%); wrote %s\n",
                        static_cast<unsigned long long>(t.uniform.interesting),
                        static_cast<unsigned long long>(t.uniform.samples), 100.0 * t.uniform.fraction(), tq_out.c_str());
        } else if (*shorten_cmd) {
            const RunLimits lim{sh_steps, sh_n, std::nullopt};
            const RunResult before = run_stream(sh_program, lim);
            const ShortenedProgram sp = shorten(before.program, lim);
            std::printf("original\t%s\t%u\n", ops_to_string(before.program.stream()).c_str(), sp.original_len);
            std::printf("shortened\t%s\t%u\n", ops_to_string(sp.program.stream()).c_str(), sp.shortened_len);
            std::printf("output\t%s\n", sequence_string(before.output).c_str());
        } else if (*stats) {
            ShardStats st;
            for (const auto& p : st_shards) accumulate_stats(read_shard(p), st);
            st.write(std::cout);
        } else if (*verify) {
            bool all_ok = true;
            for (const auto& p : vf_shards) {
                const VerifyReport rep = verify_shard(p, vf_samples);
                std::printf("%s: %s\n", p.c_str(), rep.ok() ? "OK" : "FAILED");
                for (const auto& c : rep.checks) {
                    std::printf("  %-18s %s%s%s\n", c.name.c_str(), c.ok ? "ok" : "FAIL", c.detail.empty() ? "" : "  ",
                                c.detail.c_str());
                }
                all_ok = all_ok && rep.ok();
            }
            return all_ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solgen: %s\n", e.what());
        return 1;
    }
    return 0;
}
