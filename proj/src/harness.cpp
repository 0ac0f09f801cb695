#include "coupling/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "coupling/dbar.hpp"
#include "coupling/markov_coupling.hpp"
#include "coupling/random_instances.hpp"
#include "coupling/ruelle.hpp"
#include "coupling/transport.hpp"

namespace coupling::harness {

namespace fs = std::filesystem;
using nlohmann::json;

double ExperimentConfig::number(const std::string& key, double fallback) const {
    if (!params.contains(key)) return fallback;
    const auto& v = params.at(key);
    if (!v.is_number()) throw std::invalid_argument("config: '" + key + "' must be a number");
    return v.get<double>();
}

std::int64_t ExperimentConfig::integer(const std::string& key, std::int64_t fallback) const {
    if (!params.contains(key)) return fallback;
    const auto& v = params.at(key);
    if (!v.is_number_integer()) throw std::invalid_argument("config: '" + key + "' must be an integer");
    return v.get<std::int64_t>();
}

std::string ExperimentConfig::text(const std::string& key) const {
    if (!params.contains(key)) throw std::invalid_argument("config: missing key '" + key + "'");
    const auto& v = params.at(key);
    if (!v.is_string()) throw std::invalid_argument("config: '" + key + "' must be a string");
    return v.get<std::string>();
}

fs::path ExperimentConfig::file(const std::string& key) const {
    fs::path p = text(key);
    return p.is_absolute() ? p : base_dir / p;
}

std::uint64_t ExperimentConfig::require_seed() const {
    if (!seed) throw std::invalid_argument("config: experiment '" + experiment + "' is stochastic and needs a seed");
    return *seed;
}

namespace {

// Keys naming input files; they must exist before anything runs.
const std::vector<std::string> kFileKeys = {"matrix", "init", "init_x", "init_y", "p", "q", "potential"};

std::uint64_t parse_seed(const std::string& text) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("seed must be a non-negative integer: " + text);
    return v;
}

}  // namespace

ExperimentConfig make_config(const std::string& experiment, const json& params, const fs::path& base_dir) {
    if (!params.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
    for (const auto& [key, value] : params.items())
        if (value.is_object() || value.is_array())
            throw std::invalid_argument("config: '" + key + "' is nested; the config must be flat");
    ExperimentConfig c;
    c.experiment = experiment;
    c.params = params;
    c.base_dir = base_dir;
    if (params.contains("experiment") && params.at("experiment").get<std::string>() != experiment)
        throw std::invalid_argument("config: written for '" + params.at("experiment").get<std::string>() +
                                    "', not '" + experiment + "'");
    if (params.contains("seed")) {
        const auto& s = params.at("seed");
        if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
            throw std::invalid_argument("config: 'seed' must be a non-negative integer");
        c.seed = s.get<std::uint64_t>();
    }
    if (const char* env = std::getenv("COUPLING_LAB_SEED"); env && *env) c.seed = parse_seed(env);
    c.output_dir = params.contains("output") ? c.file("output") : base_dir / "out";
    for (const auto& key : kFileKeys)
        if (params.contains(key) && !fs::exists(c.file(key)))
            throw std::invalid_argument("config: file for '" + key + "' not found: " + c.file(key).string());
    return c;
}

ExperimentConfig load_config(const fs::path& path, const std::string& experiment) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path.string());
    json params;
    try {
        params = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
    return make_config(experiment, params, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

bool RunManifest::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckTally& c) { return c.failed == 0; });
}

json RunManifest::to_json() const {
    json j;
    j["experiment"] = experiment;
    j["config"] = config;
    j["version"] = version;
    j["started_at"] = started_at;
    j["wall_seconds"] = wall_seconds;
    j["checks"] = json::array();
    for (const auto& c : checks)
        j["checks"].push_back({{"name", c.name},
                               {"passed", c.passed},
                               {"failed", c.failed},
                               {"max_violation", c.max_violation},
                               {"messages", c.messages}});
    j["values"] = values;
    j["artifacts"] = artifacts;
    j["ok"] = ok();
    return j;
}

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

class Checks {
public:
    // violation = measured excess over the allowed value; passes when <= 0.
    void record(const std::string& name, double violation, const std::string& detail = {}) {
        auto& t = get(name);
        const bool pass = violation <= 0.0;
        if (t.passed + t.failed == 0) t.max_violation = violation;
        else t.max_violation = std::max(t.max_violation, violation);
        if (pass) {
            ++t.passed;
        } else {
            ++t.failed;
            if (t.messages.size() < 10 && !detail.empty()) t.messages.push_back(detail);
        }
    }
    void fail(const std::string& name, const std::string& message) {
        auto& t = get(name);
        ++t.failed;
        t.max_violation = std::max(t.max_violation, std::numeric_limits<double>::infinity());
        if (t.messages.size() < 10) t.messages.push_back(message);
    }
    std::vector<CheckTally> tallies() const { return tallies_; }

private:
    CheckTally& get(const std::string& name) {
        for (auto& t : tallies_)
            if (t.name == name) return t;
        tallies_.push_back({name, 0, 0, 0.0, {}});
        return tallies_.back();
    }
    std::vector<CheckTally> tallies_;
};

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : columns_(header.size()) { line(header); }
    Csv& row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw std::logic_error("csv row has the wrong number of columns");
        line(cells);
        return *this;
    }
    std::string str() const { return out_.str(); }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    std::size_t columns_;
    std::ostringstream out_;
};

std::string num(double v) { return csv_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

// Runs f(0..n-1) on up to k threads; results come back in index order.
template <class R>
std::vector<R> parallel_map(std::size_t n, int k, const std::function<R(std::size_t)>& f) {
    std::vector<std::optional<R>> out(n);
    std::vector<std::exception_ptr> errors(n);
    const auto workers = static_cast<std::size_t>(std::max(1, k));
    auto work = [&](std::size_t start) {
        for (std::size_t i = start; i < n; i += workers) {
            try {
                out[i] = f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<R> result;
    result.reserve(n);
    for (auto& r : out) result.push_back(std::move(*r));
    return result;
}

struct Outputs {
    std::vector<std::pair<std::string, std::string>> files;  // name, body
    Checks checks;
    std::map<std::string, double> values;
};

template <class T>
T read_file(const fs::path& path, T (*reader)(std::istream&)) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    return reader(in);
}

FiniteDistribution read_flat(const fs::path& path) { return read_file(path, read_distribution).as_finite(); }

StochasticMatrix read_chain(const fs::path& path) { return read_file(path, read_stochastic_matrix); }

Potential read_normalized_potential(const ExperimentConfig& c, Outputs& out) {
    Potential A = read_file(c.file("potential"), read_potential);
    out.values["input_normalized"] = A.normalized ? 1.0 : 0.0;
    return A.normalized ? A : normalize_potential(A);
}

// ---------------------------------------------------------------- experiments

void tv_suite(const ExperimentConfig& c, const RunOptions& o, Outputs& out) {
    const auto seed = c.require_seed();
    const auto trials = static_cast<std::size_t>(c.integer("trials", 1000));
    const auto max_size = static_cast<std::uint64_t>(c.integer("max_size", 64));
    const auto plans = c.integer("plans", 10);
    struct Row {
        std::size_t size;
        double tv, twice_mismatch, plan_excess;
    };
    const auto rows = parallel_map<Row>(trials, o.parallel, [&](std::size_t i) {
        Rng rng(seed, i);
        const std::size_t m = 1 + rng.below(max_size);
        const auto mu = random::distribution(rng, m, 0.3), nu = random::distribution(rng, m, 0.3);
        const double tv = tv_distance(mu, nu);
        Row r{m, tv, 2.0 * mismatch_mass(maximal_coupling(mu, nu).plan), -2.0};
        for (std::int64_t k = 0; k < plans; ++k)
            r.plan_excess = std::max(r.plan_excess, tv - 2.0 * mismatch_mass(random::feasible_plan(rng, mu, nu)));
        return r;
    });
    Csv csv({"trial", "size", "tv", "twice_mismatch", "max_plan_excess"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv.row({num(i), num(r.size), num(r.tv), num(r.twice_mismatch), num(r.plan_excess)});
        out.checks.record("maximal_coupling_identity", std::abs(r.tv - r.twice_mismatch) - 1e-12,
                          "trial " + std::to_string(i));
        out.checks.record("coupling_lower_bound", r.plan_excess - 1e-10, "trial " + std::to_string(i));
    }
    out.files.emplace_back("tv-suite.csv", csv.str());
}

void w1_suite(const ExperimentConfig& c, const RunOptions& o, Outputs& out) {
    const auto seed = c.require_seed();
    const auto trials = static_cast<std::size_t>(c.integer("trials", 200));
    const auto max_size = static_cast<std::uint64_t>(c.integer("max_size", 100));
    struct Row {
        std::size_t size;
        double value, primal, dual, gap;
    };
    const auto rows = parallel_map<Row>(trials, o.parallel, [&](std::size_t i) {
        Rng rng(seed, i);
        const std::size_t m = 2 + rng.below(max_size - 1);
        const auto cost = random::metric(rng, m);
        const auto mu = random::distribution(rng, m, 0.2), nu = random::distribution(rng, m, 0.2);
        const auto sol = solve_w1(mu, nu, cost);
        const auto cert = kantorovich_certificate(sol.plan, cost);
        return Row{m, sol.value, cert.primal, cert.dual, cert.gap};
    });
    Csv csv({"trial", "size", "w1", "primal", "dual", "gap"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv.row({num(i), num(r.size), num(r.value), num(r.primal), num(r.dual), num(r.gap)});
        out.checks.record("w1_duality", std::abs(r.primal - r.dual) - 1e-9, "trial " + std::to_string(i));
    }
    out.files.emplace_back("w1-suite.csv", csv.str());
}

void markov_decay(const ExperimentConfig& c, const RunOptions&, Outputs& out) {
    const auto p = read_chain(c.file("matrix"));
    const auto nu = read_flat(c.file("init"));
    const auto steps = static_cast<int>(c.integer("steps", 50));
    const auto lambda = stationary(p);
    Csv csv({"n", "tv", "bound"});
    // Computed here rather than through tv_decay_curve so a violation is
    // reported instead of aborting the run.
    std::vector<double> law(nu.weights().begin(), nu.weights().end());
    for (int n = 1; n <= steps; ++n) {
        std::vector<double> next(law.size(), 0.0);
        for (std::size_t i = 0; i < law.size(); ++i)
            for (std::size_t j = 0; j < law.size(); ++j) next[j] += law[i] * p(i, j);
        law.swap(next);
        double tv = 0.0;
        for (std::size_t i = 0; i < law.size(); ++i) tv += std::abs(law[i] - lambda[i]);
        const double bound = 2.0 * std::pow(1.0 - p.rho(), n);
        csv.row({num(n), num(tv), num(bound)});
        out.checks.record("tv_bound", tv - bound - 1e-10, "n = " + std::to_string(n));
    }
    out.values["rho"] = p.rho();
    out.files.emplace_back("markov-decay.csv", csv.str());
}

void meeting_tail(const ExperimentConfig& c, const RunOptions& o, Outputs& out) {
    const auto p = read_chain(c.file("matrix"));
    const auto ix = read_flat(c.file("init_x"));
    const auto iy = read_flat(c.file("init_y"));
    const auto steps = static_cast<int>(c.integer("steps", 100));
    const auto d = p.size();
    std::vector<double> pair(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) pair[pair_index(i, j, d)] = ix[i] * iy[j];
    const auto init_pair = FiniteDistribution::normalized(std::move(pair));

    Csv csv({"n", "tail", "bound"});
    try {
        for (const auto& t : meeting_time_tail_exact(p, init_pair, steps)) {
            csv.row({num(t.n), num(t.tail), num(t.bound)});
            out.checks.record("tail_bound", t.tail - t.bound - 1e-12, "n = " + std::to_string(t.n));
        }
    } catch (const std::logic_error& e) {
        out.checks.fail("tail_bound", e.what());
    }
    out.files.emplace_back("meeting-tail.csv", csv.str());

    const auto paths = static_cast<std::size_t>(c.integer("paths", 0));
    if (paths == 0) return;
    const auto seed = c.require_seed();
    const auto horizon = static_cast<int>(c.integer("horizon", 200));
    const auto times = parallel_map<CouplingTimes>(paths, o.parallel, [&](std::size_t k) {
        return coupling_times(simulate_coalescing(p, ix, iy, horizon, seed + k));
    });
    Csv sim({"path", "first_meeting", "coupling"});
    auto cell = [](const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : std::string(); };
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto& t = times[k];
        sim.row({num(k), cell(t.first_meeting), cell(t.coupling)});
        out.checks.record("coupling_equals_meeting", t.first_meeting == t.coupling ? 0.0 : 1.0,
                          "path " + std::to_string(k));
    }
    out.files.emplace_back("meeting-tail-paths.csv", sim.str());
}

void dbar_suite(const ExperimentConfig& c, const RunOptions& o, Outputs& out) {
    std::vector<std::pair<BernoulliSpec, BernoulliSpec>> cases;
    if (c.has("p1") || c.has("q1")) {
        const double p1 = c.number("p1", 0.5), q1 = c.number("q1", 0.5);
        cases.emplace_back(BernoulliSpec(FiniteDistribution({p1, 1.0 - p1})),
                           BernoulliSpec(FiniteDistribution({q1, 1.0 - q1})));
    }
    if (c.has("p") || c.has("q")) cases.emplace_back(BernoulliSpec(read_flat(c.file("p"))), BernoulliSpec(read_flat(c.file("q"))));
    const auto trials = static_cast<std::size_t>(c.integer("trials", 0));
    const auto samples = static_cast<std::size_t>(c.integer("samples", 100000));
    const auto simulations = static_cast<std::size_t>(c.integer("simulations", 1));
    std::optional<std::uint64_t> seed = c.seed;
    if (trials > 0 || (simulations > 0 && samples > 0)) seed = c.require_seed();
    for (std::size_t i = 0; i < trials; ++i) {
        Rng rng(*seed, i);
        const double p1 = rng.uniform(), q1 = rng.uniform();
        cases.emplace_back(BernoulliSpec(FiniteDistribution({p1, 1.0 - p1})),
                           BernoulliSpec(FiniteDistribution({q1, 1.0 - q1})));
    }
    if (cases.empty()) throw std::invalid_argument("dbar-suite: give p1/q1, p/q files or trials");

    struct Row {
        double p1, q1, lp;
        std::optional<double> closed, monotone, simulated, stderr_;
    };
    const auto rows = parallel_map<Row>(cases.size(), o.parallel, [&](std::size_t i) {
        const auto& [p, q] = cases[i];
        Row r{p[0], q[0], dbar_lp(p, q).value, {}, {}, {}, {}};
        if (p.alphabet() == 2) {
            r.closed = dbar_closed_form(p, q);
            const auto joining = p[0] <= q[0] ? monotone_joining(p, q) : monotone_joining(q, p);
            r.monotone = joining.off_diagonal_mass();
            if (i < simulations && samples > 0) {
                r.simulated = hamming_mean(sample_joining(joining, samples, *seed + 1000003 * i));
                r.stderr_ = std::sqrt(*r.simulated * (1.0 - *r.simulated) / static_cast<double>(samples));
            }
        }
        return r;
    });
    Csv csv({"case", "p1", "q1", "closed_form", "lp", "monotone", "simulated", "stderr"});
    auto cell = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv.row({num(i), num(r.p1), num(r.q1), cell(r.closed), num(r.lp), cell(r.monotone), cell(r.simulated),
                 cell(r.stderr_)});
        const std::string where = "case " + std::to_string(i);
        if (r.closed) out.checks.record("closed_form_equals_lp", std::abs(*r.closed - r.lp) - 1e-12, where);
        if (r.monotone) out.checks.record("monotone_joining_optimal", std::abs(*r.monotone - r.lp) - 1e-12, where);
        if (r.simulated)
            out.checks.record("simulation_within_3se", std::abs(*r.simulated - *r.closed) - 3.0 * *r.stderr_, where);
    }
    out.values["value"] = rows.front().lp;
    out.files.emplace_back("dbar-suite.csv", csv.str());
}

std::optional<double> c_override(const ExperimentConfig& c) {
    if (!c.has("C_override")) return std::nullopt;
    return c.number("C_override", 0.0);
}

void ruelle_certify(const ExperimentConfig& c, const RunOptions&, Outputs& out) {
    const Potential A = read_normalized_potential(c, out);
    CertificateOptions opt;
    opt.C_override = c_override(c);
    opt.ly_trials = static_cast<int>(c.integer("trials", 1000));
    opt.ly_seed = c.seed.value_or(42);
    ContractionCertificate cert{};
    try {
        cert = make_certificate(A, opt);
    } catch (const std::runtime_error& e) {
        out.checks.fail("certificate", e.what());
        return;
    }
    const double ly = lasota_yorke_check(A, cert, opt.ly_trials, opt.ly_seed);
    out.checks.record("certificate", certificate_violations(cert).empty() ? 0.0 : 1.0);
    out.checks.record("lasota_yorke", ly - 1e-10);
    Csv csv({"theta", "M", "C", "alpha1", "delta", "Lambda", "a", "T", "alpha", "ly_violation"});
    csv.row({num(cert.theta), num(cert.M), num(cert.C), num(cert.alpha1), num(cert.delta), num(cert.Lambda),
             num(cert.a), num(cert.T), num(cert.alpha), num(ly)});
    out.values.insert({{"theta", cert.theta}, {"M", cert.M}, {"C", cert.C}, {"alpha1", cert.alpha1},
                       {"delta", cert.delta}, {"Lambda", cert.Lambda}, {"a", cert.a},
                       {"T", static_cast<double>(cert.T)}, {"alpha", cert.alpha}, {"ly_violation", ly}});
    out.files.emplace_back("ruelle-certify.csv", csv.str());
}

void ruelle_contract(const ExperimentConfig& c, const RunOptions& o, Outputs& out) {
    const Potential A = read_normalized_potential(c, out);
    CertificateOptions opt;
    opt.C_override = c_override(c);
    const auto cert = make_certificate(A, opt);
    out.values["alpha"] = cert.alpha;
    out.values["T"] = cert.T;

    struct Case {
        std::string kind, left, right;
        ContractionCheck check;
    };
    std::vector<std::function<Case()>> jobs;
    if (c.has("x") || c.has("y")) {
        const auto x = ShiftPoint::parse(c.text("x")), y = ShiftPoint::parse(c.text("y"));
        jobs.emplace_back([&, x, y] {
            return Case{"point", x.to_string(), y.to_string(), verify_pointwise_contraction(A, x, y, cert)};
        });
    }
    const auto pairs = static_cast<std::size_t>(c.integer("pairs", 0));
    const auto measures = static_cast<std::size_t>(c.integer("measures", 0));
    const auto atoms = static_cast<std::size_t>(c.integer("atoms", 4));
    if (pairs + measures > 0) {
        const auto seed = c.require_seed();
        for (std::size_t k = 0; k < pairs; ++k)
            jobs.emplace_back([&, seed, k] {
                Rng rng(seed, k);
                const auto x = random::shift_point(rng, A.alphabet()), y = random::shift_point(rng, A.alphabet());
                return Case{"point", x.to_string(), y.to_string(), verify_pointwise_contraction(A, x, y, cert)};
            });
        for (std::size_t k = 0; k < measures; ++k)
            jobs.emplace_back([&, seed, k] {
                Rng rng(seed, pairs + k);
                const auto mu = random::atomic_measure(rng, A.alphabet(), atoms);
                const auto nu = random::atomic_measure(rng, A.alphabet(), atoms);
                return Case{"measure", "random " + std::to_string(mu.size()), "random " + std::to_string(nu.size()),
                            verify_measure_contraction(A, mu, nu, cert)};
            });
    }
    if (jobs.empty()) throw std::invalid_argument("ruelle-contract: give x and y, or pairs/measures with a seed");
    const auto cases = parallel_map<Case>(jobs.size(), o.parallel, [&](std::size_t i) { return jobs[i](); });
    Csv csv({"case", "kind", "left", "right", "lhs", "rhs", "pass"});
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& k = cases[i];
        csv.row({num(i), k.kind, k.left, k.right, num(k.check.lhs), num(k.check.rhs), k.check.pass ? "1" : "0"});
        out.checks.record(k.kind + "_contraction", k.check.lhs - k.check.rhs - 1e-9, "case " + std::to_string(i));
    }
    out.files.emplace_back("ruelle-contract.csv", csv.str());
}

void ruelle_iterate(const ExperimentConfig& c, const RunOptions&, Outputs& out) {
    const Potential A = read_normalized_potential(c, out);
    CertificateOptions opt;
    opt.C_override = c_override(c);
    const auto cert = make_certificate(A, opt);
    const auto start = ShiftPoint::parse(c.text("start"));
    const auto steps = static_cast<int>(c.integer("steps", 3));
    const auto it = iterate_to_gibbs(A, AtomicMeasure::dirac(start), steps, cert);
    Csv csv({"block", "gap", "ratio", "ref_gap"});
    for (const auto& b : it.blocks) {
        csv.row({num(b.block), num(b.gap), b.ratio ? num(*b.ratio) : std::string(), num(b.ref_gap)});
        if (b.ratio) out.checks.record("gap_ratio", *b.ratio - cert.alpha - 1e-6, "block " + std::to_string(b.block));
    }
    out.values["alpha"] = cert.alpha;
    out.values["T"] = cert.T;
    const auto d = static_cast<std::size_t>(A.alphabet());
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            out.values["cylinder_" + std::to_string(i + 1) + std::to_string(j + 1)] = it.depth2_weights[i * d + j];
    out.files.emplace_back("ruelle-iterate.csv", csv.str());
}

using Experiment = void (*)(const ExperimentConfig&, const RunOptions&, Outputs&);

const std::vector<std::pair<std::string, Experiment>>& registry() {
    static const std::vector<std::pair<std::string, Experiment>> r = {
        {"tv-suite", tv_suite},         {"w1-suite", w1_suite},
        {"markov-decay", markov_decay}, {"meeting-tail", meeting_tail},
        {"dbar-suite", dbar_suite},     {"ruelle-certify", ruelle_certify},
        {"ruelle-contract", ruelle_contract}, {"ruelle-iterate", ruelle_iterate},
    };
    return r;
}

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

std::vector<std::string> experiment_names() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : registry()) names.push_back(name);
    return names;
}

RunManifest run(const ExperimentConfig& config, const RunOptions& options) {
    Experiment fn = nullptr;
    for (const auto& [name, f] : registry())
        if (name == config.experiment) fn = f;
    if (!fn) {
        std::string list;
        for (const auto& n : experiment_names()) list += (list.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown experiment '" + config.experiment + "'; available: " + list);
    }

    RunManifest m;
    m.experiment = config.experiment;
    m.config = config.params;
    if (config.seed) m.config["seed"] = *config.seed;
    m.started_at = now_utc();
    const auto t0 = std::chrono::steady_clock::now();
    Outputs out;
    fn(config, options, out);
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.checks = out.checks.tallies();
    m.values = out.values;

    fs::create_directories(config.output_dir);
    for (const auto& [name, body] : out.files) {
        const auto path = config.output_dir / name;
        std::ofstream f(path, std::ios::binary);
        f << body;
        if (!f) throw std::runtime_error("cannot write " + path.string());
        m.artifacts.push_back(path.string());
    }
    std::ofstream mf(config.output_dir / "manifest.json");
    mf << std::setw(2) << m.to_json() << '\n';
    return m;
}

}  // namespace coupling::harness
