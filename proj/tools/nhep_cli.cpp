// nhep: command-line front end.  Frequencies in kHz, times in us.
// Exit codes: 0 ok, 2 usage, 3 domain refusal, 4 numerical failure.

#include <CLI11.hpp>

#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nhep/nhep.hpp"

using namespace nhep;

namespace {

struct Globals {
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::string config;
  bool emit_schema = false;
};

Globals G;

json config_doc() { return G.config.empty() ? json::object() : load_json_file(G.config); }

// Writes to --out or stdout.
void emit_text(const std::string& text) {
  if (G.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(G.out);
  if (!f) throw InvalidArgument("cannot write output file '" + G.out + "'");
  f << text;
  if (!f) throw InvalidArgument("write to '" + G.out + "' failed");
}

json table_json(const CsvTable& t) { return {{"columns", t.columns}, {"rows", t.rows}}; }

void emit_table(const CsvTable& t, json extra = json::object()) {
  if (G.format == "json") {
    json j = table_json(t);
    for (auto& [k, v] : extra.items()) j[k] = v;
    emit_text(j.dump(2) + "\n");
    return;
  }
  std::ostringstream os;
  write_csv(os, t);
  emit_text(os.str());
}

void emit_json(const json& j) { emit_text(j.dump(2) + "\n"); }

// "a;b;c" with each entry a std::complex literal: 1, (0,-0.5), ...
Vec3 parse_state(const std::string& text) {
  Vec3 v;
  std::stringstream ss(text);
  std::string item;
  int k = 0;
  while (std::getline(ss, item, ';')) {
    if (k == 3) throw InvalidArgument("state '" + text + "' has more than 3 entries");
    std::istringstream is(item);
    cplx z;
    if (!(is >> z) || !(is >> std::ws).eof()) throw InvalidArgument("state entry '" + item + "' is not a number");
    v(k++) = z;
  }
  if (k != 3) throw InvalidArgument("state '" + text + "' needs 3 entries separated by ';'");
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("state '" + text + "' has zero or non-finite norm");
  return v / n;
}

std::vector<double> uniform_grid(double tmax_s, int steps) {
  if (steps < 1) throw InvalidArgument("--steps must be >= 1");
  if (!(tmax_s > 0.0)) throw InvalidArgument("--tmax-us must be > 0");
  std::vector<double> t;
  for (int k = 0; k <= steps; ++k) t.push_back(tmax_s * k / steps);
  return t;
}

void add_params(CLI::App* c, ModelParams& p) {
  c->add_option("--gamma", p.gamma, "gain/loss rate (units of s)")->required();
  c->add_option("--h", p.h, "PT-preserving coupling")->required();
  c->add_option("--mu", p.mu, "PT-preserving, pseudo-chirality-breaking term")->required();
  c->add_option("--nu", p.nu, "PT-breaking term")->required();
}

Region region_from(const std::vector<double>& r) {
  Region g{r[0], r[1], r[2], r[3]};
  g.validate();
  return g;
}

TraceData read_series(const std::string& path, const std::string& value_col) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  const CsvTable t = read_csv(in);
  TraceData d;
  const auto ct = t.col("t_us"), cv = t.col(value_col);
  std::optional<std::size_t> cs;
  for (std::size_t k = 0; k < t.columns.size(); ++k)
    if (t.columns[k] == "sigma") cs = k;
  for (const auto& r : t.rows) {
    d.times.push_back(r[ct] * 1e-6);
    d.p0.push_back(r[cv]);
    if (cs) d.sigma.push_back(r[*cs]);
  }
  return d;
}

void write_series_file(const std::filesystem::path& p, const TraceData& d, const std::string& value_col) {
  CsvTable t{{"t_us", value_col}, {}};
  if (!d.sigma.empty()) t.columns.push_back("sigma");
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    std::vector<double> row{d.times[k] * 1e6, d.p0[k]};
    if (!d.sigma.empty()) row.push_back(d.sigma[k]);
    t.rows.push_back(std::move(row));
  }
  std::ofstream f(p);
  if (!f) throw InvalidArgument("cannot write '" + p.string() + "'");
  write_csv(f, t);
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Domain: return 3;
    default: return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Hermitian spin-1 exceptional-point toolkit"};
  app.set_help_flag("--help", "print help");  // -h would clash with --h
  app.fallthrough();
  app.require_subcommand(0, 1);
  app.add_option("--out", G.out, "output path (default stdout)");
  app.add_option("--format", G.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", G.seed, "RNG seed (required when noise is on)");
  app.add_option("--config", G.config, "NV-level / readout JSON")->envname("NHEP_CONFIG");
  app.add_flag("--emit-schema", G.emit_schema, "print CSV/JSON schemas and exit");

  std::function<void()> run;

  // classify
  ModelParams cp;
  double tol = kEPTolerance;
  auto* classify = app.add_subcommand("classify", "EP order at one parameter point");
  add_params(classify, cp);
  classify->add_option("--tol", tol, "relative resultant tolerance");
  classify->callback([&] {
    run = [&] {
      const auto c = classify_point(cp, tol);
      if (G.format == "json")
        emit_json(to_json_value(c));
      else
        emit_text(std::string("kind=") + to_string(c.kind) + "\ngamma=" + fmt17(c.gamma) + "\nh=" + fmt17(c.h) +
                  "\nr1_abs=" + fmt17(c.r1_abs) + "\nr2_abs=" + fmt17(c.r2_abs) + "\n");
    };
  });

  // sweep / locus
  std::vector<double> region{-2, 2, -2, 2};
  int resolution = 101;
  double smu = 0.0, snu = 0.0;
  auto* sweep = app.add_subcommand("sweep", "eigenvalue sheets over a (gamma, h) grid");
  sweep->add_option("--region", region, "gamma_min,gamma_max,h_min,h_max")->expected(4)->delimiter(',');
  sweep->add_option("--resolution", resolution, "nodes per axis");
  sweep->add_option("--mu", smu);
  sweep->add_option("--nu", snu);
  sweep->callback([&] { run = [&] { emit_table(sheet_table(sweep_sheets(region_from(region), resolution, smu, snu))); }; });

  int cells = 400;
  auto* locus = app.add_subcommand("locus", "EP3 points / lines in a region");
  locus->add_option("--region", region, "gamma_min,gamma_max,h_min,h_max")->expected(4)->delimiter(',');
  locus->add_option("--resolution", cells, "cells per axis");
  locus->add_option("--mu", smu);
  locus->add_option("--nu", snu);
  locus->callback([&] { run = [&] { emit_table(locus_table(trace_ep3_locus(smu, snu, region_from(region), cells))); }; });

  // invariant
  std::vector<double> plus, minus;
  auto* invariant = app.add_subcommand("invariant", "W from the sign of Re r1 at two points");
  invariant->add_option("--plus", plus, "gamma,h")->expected(2)->delimiter(',')->required();
  invariant->add_option("--minus", minus, "gamma,h")->expected(2)->delimiter(',')->required();
  invariant->add_option("--mu", smu);
  invariant->add_option("--nu", snu);
  invariant->callback([&] {
    run = [&] {
      const int w = topological_invariant({plus[0], plus[1]}, {minus[0], minus[1]}, smu, snu);
      if (G.format == "json")
        emit_json({{"W", w}});
      else
        emit_text("W=" + std::to_string(w) + "\n");
    };
  });

  // dispersion
  double h0 = 0.0, g0 = 1.0, mu_min = 1e-4, mu_max = 1e-2;
  int mu_samples = 9;
  auto* dispersion = app.add_subcommand("dispersion", "eigenvalue splitting vs mu at a point of the EP3 line");
  dispersion->add_option("--h0", h0);
  dispersion->add_option("--gamma0", g0);
  dispersion->add_option("--mu-min", mu_min);
  dispersion->add_option("--mu-max", mu_max);
  dispersion->add_option("--samples", mu_samples, "log-spaced mu samples");
  dispersion->callback([&] {
    run = [&] {
      if (mu_samples < 2) throw InvalidArgument("--samples must be >= 2");
      if (!(mu_min > 0.0) || !(mu_max > mu_min)) throw InvalidArgument("need 0 < --mu-min < --mu-max");
      std::vector<double> mus;
      for (int k = 0; k < mu_samples; ++k)
        mus.push_back(mu_min * std::pow(mu_max / mu_min, static_cast<double>(k) / (mu_samples - 1)));
      const auto d = dispersion_scan(h0, g0, mus);
      CsvTable t{{"mu", "splitting", "re_eps_plus", "im_eps_plus", "re_eps_minus", "im_eps_minus"}, {}};
      for (std::size_t k = 0; k < mus.size(); ++k)
        t.rows.push_back({mus[k], d.splittings[k], d.eps_plus[k].real(), d.eps_plus[k].imag(),
                          d.eps_minus[k].real(), d.eps_minus[k].imag()});
      std::cerr << "fitted_exponent=" << fmt17(d.fitted_exponent) << "\n";
      emit_table(t, {{"fitted_exponent", d.fitted_exponent}});
    };
  });

  // evolve
  ModelParams ep;
  double s_khz = 40.0, tmax_us = 30.0, eta0 = kDefaultEta0, step_ns = 0.0;
  int steps = 300;
  std::string psi_text = "0;1;0", phi_text = "0;1;0";
  bool dilated = false;
  auto* evolve = app.add_subcommand("evolve", "P0(t) for psi evolved under s*H, read in basis phi");
  add_params(evolve, ep);
  evolve->add_option("--s-khz", s_khz, "s / 2pi in kHz");
  evolve->add_option("--tmax-us", tmax_us);
  evolve->add_option("--steps", steps, "grid intervals");
  evolve->add_option("--psi", psi_text, "initial state, 'a;b;c' (normalized on input)");
  evolve->add_option("--phi", phi_text, "measured state, 'a;b;c'");
  evolve->add_flag("--dilated", dilated, "run through the 6-level Hermitian dilation");
  evolve->add_option("--eta0", eta0);
  evolve->add_option("--step-ns", step_ns, "dilated integrator step (default grid spacing / 10)");
  evolve->callback([&] {
    run = [&] {
      ep.validate();
      const double s = kTwoPi * s_khz * 1e3;
      if (!(s > 0.0)) throw InvalidArgument("--s-khz must be > 0");
      const auto grid = uniform_grid(tmax_us * 1e-6, steps);
      const Vec3 psi = parse_state(psi_text), phi = parse_state(phi_text);
      const Mat3 h = build_hamiltonian(ep).matrix();
      if (!dilated) {
        emit_table(trace_table(population_trace(Mat3(s * h), psi, phi, grid)));
        return;
      }
      const double step = step_ns > 0.0 ? step_ns * 1e-9 : (grid[1] - grid[0]) / 10.0;
      try {
        const auto r = evolve_dilated(h, s, psi, phi, eta0, grid, step);
        emit_table(trace_table(r.projected), {{"max_hermiticity_residual", r.dilated.max_hermiticity_residual}});
      } catch (const MetricNotPositive& e) {
        std::cerr << "maximum admissible t for eta0=" << eta0 << ": " << e.time * 1e6 << " us\n";
        throw;
      }
    };
  });

  // pulses
  auto* pulses = app.add_subcommand("pulses", "drive schedule realizing the dilation");
  add_params(pulses, ep);
  pulses->add_option("--s-khz", s_khz);
  pulses->add_option("--tmax-us", tmax_us);
  pulses->add_option("--steps", steps);
  pulses->add_option("--eta0", eta0);
  pulses->callback([&] {
    run = [&] {
      ep.validate();
      const double s = kTwoPi * s_khz * 1e3;
      if (!(s > 0.0)) throw InvalidArgument("--s-khz must be > 0");
      const auto grid = uniform_grid(tmax_us * 1e-6, steps);
      const Mat3 h = build_hamiltonian(ep).matrix();
      const auto nv = build_nv_levels(nv_config_from_json(config_doc()));
      const auto ps = pulse_schedule(h, grid, nv, eta0, s);
      const json side = pulse_sidecar(ps, h);
      if (G.format == "json") {
        emit_table(pulse_table(ps), {{"sidecar", side}});
        return;
      }
      emit_table(pulse_table(ps));
      if (!G.out.empty()) {
        std::ofstream f(G.out + ".json");
        if (!f) throw InvalidArgument("cannot write sidecar '" + G.out + ".json'");
        f << side.dump(2) << "\n";
      } else {
        std::cerr << side.dump() << "\n";
      }
    };
  });

  // conserved
  std::string kind = "pt";
  double s_cons_khz = 30.0;
  auto* conserved = app.add_subcommand("conserved", "C_PT(t) or C_psCh(t) for the built-in probe states");
  add_params(conserved, ep);
  conserved->add_option("--kind", kind, "pt or psch")->check(CLI::IsMember({"pt", "psch"}));
  conserved->add_option("--s-khz", s_cons_khz, "s1 (pt) or s2 (psch) / 2pi in kHz");
  conserved->add_option("--tmax-us", tmax_us);
  conserved->add_option("--steps", steps);
  conserved->callback([&] {
    run = [&] {
      const double s = kTwoPi * s_cons_khz * 1e3;
      if (!(s > 0.0)) throw InvalidArgument("--s-khz must be > 0");
      const auto grid = uniform_grid(tmax_us * 1e-6, steps);
      const auto h = build_hamiltonian(ep);
      const auto v = kind == "pt" ? conserved_pt(h, s, grid) : conserved_psch(h, s, grid);
      emit_table(series_table(grid, v));
    };
  });

  // eigenstates
  auto* eigen = app.add_subcommand("eigenstates", "filtered eigenstates and pairwise fidelities");
  add_params(eigen, ep);
  eigen->callback([&] {
    run = [&] {
      const auto t = eigenstate_table(ep);
      if (G.format == "json") {
        json evs = json::array(), filters = json::array();
        for (int k = 0; k < 3; ++k) {
          evs.push_back({{"re", t.eigenvalues[k].real()}, {"im", t.eigenvalues[k].imag()}});
          filters.push_back(t.degenerate ? json(nullptr) : json(to_string(t.filters[k])));
        }
        json F = json::array();
        for (const auto& row : t.F) {
          json r = json::array();
          for (double v : row) r.push_back(std::isnan(v) ? json(nullptr) : json(v));
          F.push_back(r);
        }
        emit_json({{"eigenvalues", evs}, {"filters", filters}, {"F", F}, {"degenerate", t.degenerate}});
        return;
      }
      CsvTable c{{"k", "re_E", "im_E", "F_k1", "F_k2", "F_k3", "degenerate"}, {}};
      for (int k = 0; k < 3; ++k)
        c.rows.push_back({static_cast<double>(k + 1), t.eigenvalues[k].real(), t.eigenvalues[k].imag(), t.F[k][0],
                          t.F[k][1], t.F[k][2], t.degenerate ? 1.0 : 0.0});
      emit_table(c);
    };
  });

  // simulate
  ModelParams sp;
  std::string out_dir = ".";
  bool noise = false;
  auto* simulate = app.add_subcommand("simulate", "synthetic traces and conserved-quantity series for retrieve");
  add_params(simulate, sp);
  simulate->add_option("--dir", out_dir, "directory for trace1.csv trace2.csv cpt.csv cpsch.csv");
  simulate->add_flag("--noise", noise, "Poisson shot noise through the readout model");
  simulate->callback([&] {
    run = [&] {
      ReadoutModel model = readout_from_json(config_doc());
      if (noise) model.shot_noise = true;
      if (model.shot_noise) {
        if (!G.seed) throw InvalidArgument("--seed is required when shot noise is enabled");
        model.seed = *G.seed;
      }
      const auto d = simulate_experiment(sp, ExperimentConfig{}, model);
      const std::filesystem::path dir(out_dir);
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      write_series_file(dir / "trace1.csv", d.traces[0], "p0");
      write_series_file(dir / "trace2.csv", d.traces[1], "p0");
      write_series_file(dir / "cpt.csv", d.c_pt, "value");
      write_series_file(dir / "cpsch.csv", d.c_psch, "value");
      emit_json({{"s_khz", d.s / kTwoPi * 1e-3},
                 {"s1_khz", d.s1 / kTwoPi * 1e-3},
                 {"s2_khz", d.s2 / kTwoPi * 1e-3},
                 {"readout", to_json_value(model)}});
    };
  });

  // retrieve
  std::vector<std::string> traces;
  std::string cpt_path, cpsch_path;
  double s1_khz = 30.0, s2_khz = 20.0;
  std::vector<double> init{1.0, 0.0};
  int mc = 10000;
  auto* retrieve = app.add_subcommand("retrieve", "(gamma, h, mu, nu) and eigenvalue error bars from measured series");
  retrieve->add_option("--traces", traces, "two CSVs with t_us,p0[,sigma] for the two probe pairs")
      ->expected(2)
      ->required();
  retrieve->add_option("--cpt", cpt_path, "CSV t_us,value[,sigma]")->required();
  retrieve->add_option("--cpsch", cpsch_path, "CSV t_us,value[,sigma]")->required();
  retrieve->add_option("--s-khz", s_khz);
  retrieve->add_option("--s1-khz", s1_khz);
  retrieve->add_option("--s2-khz", s2_khz);
  retrieve->add_option("--init", init, "gamma,h starting point")->expected(2)->delimiter(',');
  retrieve->add_option("--mc-samples", mc);
  retrieve->callback([&] {
    run = [&] {
      if (!(s_khz > 0.0 && s1_khz > 0.0 && s2_khz > 0.0)) throw InvalidArgument("scalings must be > 0");
      ExperimentData d;
      d.traces = {read_series(traces[0], "p0"), read_series(traces[1], "p0")};
      d.c_pt = read_series(cpt_path, "value");
      d.c_psch = read_series(cpsch_path, "value");
      d.s = kTwoPi * s_khz * 1e3;
      d.s1 = kTwoPi * s1_khz * 1e3;
      d.s2 = kTwoPi * s2_khz * 1e3;
      const auto r = retrieve_parameters(d, {init[0], init[1]});
      const auto ev = eigenvalues_with_errors({r.gamma, r.h, r.mu, r.nu}, mc, G.seed.value_or(0));
      emit_json(estimates_json(r, &ev));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    if (G.emit_schema) {
      std::cout << schema_text();
      return 0;
    }
    if (!run) {
      std::cerr << app.help();
      return 2;
    }
    run();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
