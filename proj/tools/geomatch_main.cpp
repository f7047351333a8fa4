#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "geomatch/generate.hpp"
#include "geomatch/io.hpp"
#include "geomatch/oracle.hpp"
#include "geomatch/rng.hpp"
#include "geomatch/solver.hpp"

using namespace geomatch;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitEps = 3;
constexpr int kExitBudget = 4;
constexpr int kExitInvalidMatching = 5;
constexpr int kExitRatio = 6;

Norm parse_norm(const std::string& s) {
    if (s == "l1") return Norm::L1;
    if (s == "linf") return Norm::LInf;
    return Norm::L2;
}

int load_instance(const std::string& path, RawInstance& inst) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        return kExitParse;
    }
    ParseError err;
    if (!read_instance(in, inst, err)) {
        std::cerr << path << ":" << err.line << ": " << err.message << "\n";
        return kExitParse;
    }
    return 0;
}

int cmd_match(const std::string& input, const std::string& out_path, double eps,
              const std::string& norm_s, const std::string& mode_s, bool trace) {
    if (!(eps > 0.0) || eps > 1.0) {
        std::cerr << "error: eps must be in (0, 1]\n";
        return kExitEps;
    }
    RawInstance inst;
    if (int rc = load_instance(input, inst)) return rc;
    ConstantsConfig cfg =
        mode_s == "theory" ? ConstantsConfig::theory() : ConstantsConfig::practical();
    cfg.trace = trace;
    try {
        SolveResult res = solve(inst, eps, cfg, parse_norm(norm_s), trace ? &std::cerr : nullptr);
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return kExitParse;
        }
        write_matching(out, res.cost, res.match_a);
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEps;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBudget;
    }
}

int cmd_verify(const std::string& input, const std::string& matching, bool exact, double eps,
               const std::string& norm_s) {
    RawInstance inst;
    if (int rc = load_instance(input, inst)) return rc;
    std::ifstream min(matching);
    if (!min) {
        std::cerr << "error: cannot open " << matching << "\n";
        return kExitParse;
    }
    MatchingFile mf;
    ParseError err;
    if (!read_matching(min, mf, err)) {
        std::cerr << matching << ":" << err.line << ": " << err.message << "\n";
        return kExitParse;
    }
    Norm norm = parse_norm(norm_s);
    int n = inst.n();
    if (int(mf.pairs.size()) != n) {
        std::cerr << "invalid: expected " << n << " pairs, got " << mf.pairs.size() << "\n";
        return kExitInvalidMatching;
    }
    std::vector<int> match_a(size_t(n), -1), seen_b(size_t(n), 0);
    for (auto [ai, bi] : mf.pairs) {
        if (ai < 0 || ai >= n || bi < 0 || bi >= n || match_a[size_t(ai)] >= 0 ||
            seen_b[size_t(bi)]) {
            std::cerr << "invalid: indices do not form a bijection\n";
            return kExitInvalidMatching;
        }
        match_a[size_t(ai)] = bi;
        seen_b[size_t(bi)] = 1;
    }
    double cost = 0.0;
    for (int i = 0; i < n; ++i) cost += dist(inst.a[i], inst.b[size_t(match_a[size_t(i)])], inst.d, norm);
    double tol = 1e-9 * std::max(1.0, std::fabs(cost));
    if (std::fabs(cost - mf.cost) > tol) {
        std::cerr << "invalid: recorded cost " << format_double(mf.cost)
                  << " differs from recomputed " << format_double(cost) << "\n";
        return kExitInvalidMatching;
    }
    if (exact) {
        if (n > 512) {
            std::cerr << "error: --exact supports n <= 512\n";
            return kExitParse;
        }
        auto opt = oracle::hungarian(inst.a, inst.b, inst.d, norm);
        double ratio = opt.cost > 0 ? cost / opt.cost : 1.0;
        std::cout << "ratio " << format_double(ratio) << "\n";
        if (eps > 0.0 && ratio > 1.0 + eps + 1e-9) return kExitRatio;
    }
    return 0;
}

int cmd_gen(int n, int d, const std::string& dist, uint64_t seed, const std::string& out_path) {
    try {
        RawInstance inst = generate_instance(n, d, dist, seed);
        if (out_path.empty()) {
            write_instance(std::cout, inst);
        } else {
            std::ofstream out(out_path);
            if (!out) {
                std::cerr << "error: cannot write " << out_path << "\n";
                return kExitParse;
            }
            write_instance(out, inst);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
}

struct BenchRow {
    int n, d, trial;
    double eps, time_ms, cost, ratio;
    bool has_ratio;
    int64_t path_edges, cycle_edges;
};

int cmd_bench(const std::string& sizes_s, int d, double eps, int trials,
              const std::string& csv_path, const std::string& norm_s) {
    if (!(eps > 0.0) || eps > 1.0) {
        std::cerr << "error: eps must be in (0, 1]\n";
        return kExitEps;
    }
    std::vector<int> sizes;
    {
        std::stringstream ss(sizes_s);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            int v = std::atoi(tok.c_str());
            if (v < 1) {
                std::cerr << "error: bad size '" << tok << "'\n";
                return kExitParse;
            }
            sizes.push_back(v);
        }
    }
    if (sizes.empty()) {
        std::cerr << "error: --sizes required\n";
        return kExitParse;
    }
    Norm norm = parse_norm(norm_s);
    unsigned threads = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("GEOMATCH_THREADS")) {
        int t = std::atoi(env);
        if (t >= 1) threads = unsigned(t);
    }
    struct Task {
        int n, trial;
    };
    std::vector<Task> tasks;
    for (int n : sizes)
        for (int t = 0; t < trials; ++t) tasks.push_back({n, t});
    std::vector<BenchRow> rows(tasks.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& tk = tasks[i];
            RawInstance inst = generate_instance(
                tk.n, d, "uniform", splitmix64(uint64_t(tk.n) * 1000003ULL + uint64_t(tk.trial)));
            auto t0 = std::chrono::steady_clock::now();
            SolveResult res = solve(inst, eps, ConstantsConfig::practical(), norm);
            auto t1 = std::chrono::steady_clock::now();
            BenchRow row;
            row.n = tk.n;
            row.d = d;
            row.trial = tk.trial;
            row.eps = eps;
            row.time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            row.cost = res.cost;
            row.has_ratio = tk.n <= 512;
            row.ratio = 0.0;
            if (row.has_ratio) {
                auto opt = oracle::hungarian(inst.a, inst.b, d, norm);
                row.ratio = opt.cost > 0 ? res.cost / opt.cost : 1.0;
            }
            row.path_edges = res.winner >= 0 ? res.runs[size_t(res.winner)].stats.path_edges : 0;
            row.cycle_edges = res.winner >= 0 ? res.runs[size_t(res.winner)].stats.cycle_edges : 0;
            rows[i] = row;
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads && t < tasks.size(); ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!csv_path.empty()) {
        file.open(csv_path);
        if (!file) {
            std::cerr << "error: cannot write " << csv_path << "\n";
            return kExitParse;
        }
        out = &file;
    }
    (*out) << "n,d,eps,trial,time_ms,cost,ratio,total_path_edges,total_cycle_edges\n";
    for (const auto& r : rows) {
        (*out) << r.n << "," << r.d << "," << format_double(r.eps) << "," << r.trial << ","
               << format_double(r.time_ms) << "," << format_double(r.cost) << ",";
        if (r.has_ratio) (*out) << format_double(r.ratio);
        (*out) << "," << r.path_edges << "," << r.cycle_edges << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic (1+eps)-approximate Euclidean bipartite matching"};
    app.require_subcommand(1);

    std::string input, out_path, matching, norm_s = "l2", mode_s = "practical";
    std::string dist = "uniform", sizes, csv_path;
    double eps = 0.25;
    bool trace = false, exact = false;
    double verify_eps = 0.0;
    int n = 0, d = 2, trials = 1;
    uint64_t seed = 0;

    auto* m = app.add_subcommand("match", "compute an approximate matching");
    m->add_option("--input", input)->required();
    m->add_option("--eps", eps);
    m->add_option("--norm", norm_s)->check(CLI::IsMember({"l2", "l1", "linf"}));
    m->add_option("--mode", mode_s)->check(CLI::IsMember({"theory", "practical"}));
    m->add_flag("--trace", trace);
    m->add_option("--out", out_path)->required();

    auto* v = app.add_subcommand("verify", "check a matching file");
    v->add_option("--input", input)->required();
    v->add_option("--matching", matching)->required();
    v->add_flag("--exact", exact);
    v->add_option("--eps", verify_eps);
    v->add_option("--norm", norm_s)->check(CLI::IsMember({"l2", "l1", "linf"}));

    auto* g = app.add_subcommand("gen", "generate a reproducible instance");
    g->add_option("--n", n)->required();
    g->add_option("--d", d);
    g->add_option("--dist", dist)->check(CLI::IsMember({"uniform", "clustered", "grid"}));
    g->add_option("--seed", seed);
    g->add_option("--out", out_path);

    auto* b = app.add_subcommand("bench", "timing and scaling measurements");
    b->add_option("--sizes", sizes)->required();
    b->add_option("--d", d);
    b->add_option("--eps", eps);
    b->add_option("--trials", trials);
    b->add_option("--csv", csv_path);
    b->add_option("--norm", norm_s)->check(CLI::IsMember({"l2", "l1", "linf"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return e.get_exit_code() == 0 ? 0 : kExitParse;
    }

    if (m->parsed()) return cmd_match(input, out_path, eps, norm_s, mode_s, trace);
    if (v->parsed()) return cmd_verify(input, matching, exact, verify_eps, norm_s);
    if (g->parsed()) return cmd_gen(n, d, dist, seed, out_path);
    if (b->parsed()) return cmd_bench(sizes, d, eps, trials, csv_path, norm_s);
    return kExitParse;
}
