// coupling-lab: experiment runner plus direct access to the library modules.
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "coupling/dbar.hpp"
#include "coupling/harness.hpp"
#include "coupling/markov_coupling.hpp"
#include "coupling/ruelle.hpp"
#include "coupling/transport.hpp"

using namespace coupling;

namespace {

template <class T>
T read_with(const std::string& path, T (*reader)(std::istream&)) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    return reader(in);
}

FiniteDistribution read_flat(const std::string& path) { return read_with(path, read_distribution).as_finite(); }

// Writes to the named file, or stdout when the name is empty or "-".
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw std::invalid_argument("cannot write " + path);
        }
    }
    std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

Potential load_potential(const std::string& path) {
    Potential A = read_with(path, read_potential);
    return A.normalized ? A : normalize_potential(A);
}

void print_certificate(const ContractionCertificate& c) {
    std::cout << std::setprecision(17) << "theta " << c.theta << "\nM " << c.M << "\nC " << c.C << "\nalpha1 "
              << c.alpha1 << "\ndelta " << c.delta << "\nLambda " << c.Lambda << "\na " << c.a << "\nT " << c.T
              << "\nalpha " << c.alpha << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Couplings, transport distances and Ruelle operator contraction"};
    app.require_subcommand(1);

    // Experiments driven by a flat JSON config.
    std::string config_path, out_dir;
    int parallel = 1;
    std::string chosen;
    for (const auto& name : harness::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config_path, "flat JSON config")->required()->check(CLI::ExistingFile);
        sub->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->callback([&chosen, name] { chosen = name; });
    }

    // transport
    auto* transport = app.add_subcommand("transport", "optimal transport on finite sets");
    transport->require_subcommand(1);
    std::string mu_path, nu_path, cost_path;
    auto* w1 = transport->add_subcommand("w1", "exact W1 value and plan");
    w1->add_option("--mu", mu_path)->required()->check(CLI::ExistingFile);
    w1->add_option("--nu", nu_path)->required()->check(CLI::ExistingFile);
    w1->add_option("--cost", cost_path, "dense cost matrix; discrete metric when omitted")->check(CLI::ExistingFile);
    w1->callback([&] {
        const auto mu = read_flat(mu_path), nu = read_flat(nu_path);
        const CostMatrix cost = cost_path.empty() ? CostMatrix::discrete(mu.size())
                                                  : CostMatrix(read_with(cost_path, read_matrix));
        const auto sol = solve_w1(mu, nu, cost);
        std::cout << std::setprecision(17) << sol.value << '\n';
        write_matrix(std::cout, sol.plan.matrix());
    });
    auto* maxc = transport->add_subcommand("maxcoupling", "maximal coupling and its mismatch mass");
    maxc->add_option("--mu", mu_path)->required()->check(CLI::ExistingFile);
    maxc->add_option("--nu", nu_path)->required()->check(CLI::ExistingFile);
    maxc->callback([&] {
        const auto mc = maximal_coupling(read_flat(mu_path), read_flat(nu_path));
        std::cout << std::setprecision(17) << mismatch_mass(mc.plan) << '\n';
        write_matrix(std::cout, mc.plan.matrix());
    });

    // markov
    auto* markov = app.add_subcommand("markov", "Markov chain coupling bounds");
    markov->require_subcommand(1);
    std::string matrix_path, init_path, init_y_path, csv_out;
    int steps = 50, paths = 1, horizon = 100;
    std::uint64_t seed = 0;
    auto* decay = markov->add_subcommand("decay", "tv(lambda, nu P^n) against 2(1-rho)^n");
    decay->add_option("--matrix", matrix_path)->required()->check(CLI::ExistingFile);
    decay->add_option("--init", init_path)->required()->check(CLI::ExistingFile);
    decay->add_option("--steps", steps);
    decay->add_option("--out", csv_out);
    decay->callback([&] {
        const auto p = read_with(matrix_path, read_stochastic_matrix);
        Sink sink(csv_out);
        sink.os() << "n,tv,bound\n";
        for (const auto& pt : tv_decay_curve(p, read_flat(init_path), steps))
            sink.os() << pt.n << ',' << harness::csv_number(pt.tv) << ',' << harness::csv_number(pt.bound) << '\n';
    });
    auto* tail = markov->add_subcommand("meeting-tail", "exact tail of the meeting time of the independent pair");
    tail->add_option("--matrix", matrix_path)->required()->check(CLI::ExistingFile);
    tail->add_option("--init-x", init_path)->required()->check(CLI::ExistingFile);
    tail->add_option("--init-y", init_y_path)->required()->check(CLI::ExistingFile);
    tail->add_option("--steps", steps);
    tail->add_option("--out", csv_out);
    tail->callback([&] {
        const auto p = read_with(matrix_path, read_stochastic_matrix);
        const auto ix = read_flat(init_path), iy = read_flat(init_y_path);
        const auto d = p.size();
        std::vector<double> pair(d * d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) pair[pair_index(i, j, d)] = ix[i] * iy[j];
        Sink sink(csv_out);
        sink.os() << "n,tail,bound\n";
        for (const auto& pt : meeting_time_tail_exact(p, FiniteDistribution::normalized(pair), steps))
            sink.os() << pt.n << ',' << harness::csv_number(pt.tail) << ',' << harness::csv_number(pt.bound) << '\n';
    });
    auto* sim = markov->add_subcommand("simulate", "coalescing chain paths and their coupling times");
    sim->add_option("--matrix", matrix_path)->required()->check(CLI::ExistingFile);
    sim->add_option("--init-x", init_path)->required()->check(CLI::ExistingFile);
    sim->add_option("--init-y", init_y_path)->required()->check(CLI::ExistingFile);
    sim->add_option("--seed", seed)->required();
    sim->add_option("--paths", paths);
    sim->add_option("--horizon", horizon);
    sim->add_option("--out", csv_out);
    sim->callback([&] {
        const auto p = read_with(matrix_path, read_stochastic_matrix);
        const auto ix = read_flat(init_path), iy = read_flat(init_y_path);
        Sink sink(csv_out);
        sink.os() << "path,first_meeting,coupling\n";
        for (int k = 0; k < paths; ++k) {
            const auto t = coupling_times(simulate_coalescing(p, ix, iy, horizon, seed + static_cast<std::uint64_t>(k)));
            sink.os() << k << ',' << (t.first_meeting ? std::to_string(*t.first_meeting) : "") << ','
                      << (t.coupling ? std::to_string(*t.coupling) : "") << '\n';
        }
    });

    // dbar
    std::string p_path, q_path;
    bool use_lp = false;
    auto* dbar = app.add_subcommand("dbar", "d-bar distance of two Bernoulli measures");
    dbar->add_option("--p", p_path)->required()->check(CLI::ExistingFile);
    dbar->add_option("--q", q_path)->required()->check(CLI::ExistingFile);
    dbar->add_flag("--lp", use_lp, "solve the transport LP instead of the closed form");
    dbar->callback([&] {
        const BernoulliSpec p(read_flat(p_path)), q(read_flat(q_path));
        std::cout << std::setprecision(17);
        if (use_lp || p.alphabet() != 2) {
            const auto sol = dbar_lp(p, q);
            std::cout << sol.value << '\n';
            write_matrix(std::cout, sol.joining.matrix());
        } else {
            const auto j = p[0] <= q[0] ? monotone_joining(p, q) : monotone_joining(q, p);
            std::cout << dbar_closed_form(p, q) << '\n';
            write_matrix(std::cout, j.matrix());
        }
    });

    // ruelle
    auto* ruelle = app.add_subcommand("ruelle", "Ruelle operator certificates");
    ruelle->require_subcommand(1);
    std::string potential_path, x_text, y_text, start_text;
    auto* certify = ruelle->add_subcommand("certify", "contraction certificate of a potential");
    certify->add_option("--potential", potential_path)->required()->check(CLI::ExistingFile);
    certify->callback([&] { print_certificate(make_certificate(load_potential(potential_path))); });
    auto* contract = ruelle->add_subcommand("contract", "check d1((L*)^T dx, (L*)^T dy) <= alpha d(x, y)");
    contract->add_option("--potential", potential_path)->required()->check(CLI::ExistingFile);
    contract->add_option("--x", x_text)->required();
    contract->add_option("--y", y_text)->required();
    contract->callback([&] {
        const auto A = load_potential(potential_path);
        const auto cert = make_certificate(A);
        const auto r = verify_pointwise_contraction(A, ShiftPoint::parse(x_text), ShiftPoint::parse(y_text), cert);
        std::cout << std::setprecision(17) << "lhs " << r.lhs << "\nrhs " << r.rhs << "\npass " << r.pass << '\n';
        if (!r.pass) std::exit(1);
    });
    auto* iterate = ruelle->add_subcommand("iterate", "iterate the dual operator towards the Gibbs measure");
    iterate->add_option("--potential", potential_path)->required()->check(CLI::ExistingFile);
    iterate->add_option("--start", start_text)->required();
    iterate->add_option("--steps", steps)->required();
    iterate->add_option("--out", csv_out);
    iterate->callback([&] {
        const auto A = load_potential(potential_path);
        const auto cert = make_certificate(A);
        const auto it = iterate_to_gibbs(A, AtomicMeasure::dirac(ShiftPoint::parse(start_text)), steps, cert);
        Sink sink(csv_out);
        sink.os() << "block,gap,ratio,ref_gap\n";
        for (const auto& b : it.blocks)
            sink.os() << b.block << ',' << harness::csv_number(b.gap) << ','
                      << (b.ratio ? harness::csv_number(*b.ratio) : "") << ',' << harness::csv_number(b.ref_gap)
                      << '\n';
    });

    try {
        app.parse(argc, argv);
        if (!chosen.empty()) {
            auto config = harness::load_config(config_path, chosen);
            if (!out_dir.empty()) config.output_dir = out_dir;
            const auto manifest = harness::run(config, {parallel});
            for (const auto& c : manifest.checks)
                std::cout << c.name << ": " << c.passed << " passed, " << c.failed << " failed, max violation "
                          << c.max_violation << '\n';
            for (const auto& [k, v] : manifest.values) std::cout << k << " = " << std::setprecision(17) << v << '\n';
            std::cout << (manifest.ok() ? "OK" : "FAILED") << " (" << config.output_dir.string() << ")\n";
            return manifest.ok() ? 0 : 1;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
