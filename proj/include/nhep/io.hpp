#pragma once

// CSV and JSON emission / parsing for every exported record.  Numbers in CSV
// are printed with 17 significant digits.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nhep/dilation.hpp"
#include "nhep/dynamics.hpp"
#include "nhep/ep_analysis.hpp"
#include "nhep/nv_levels.hpp"
#include "nhep/readout.hpp"
#include "nhep/retrieval.hpp"

namespace nhep {

using json = nlohmann::json;

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return k;
    throw InvalidArgument("csv: missing column '" + name + "'");
  }
};

inline void write_csv(std::ostream& os, const CsvTable& t) {
  for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << fmt17(r[k]);
    os << '\n';
  }
  if (!os) throw InvalidArgument("csv: write failed");
}

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("csv: empty input");
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) t.columns.push_back(c);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string c;
    std::vector<double> row;
    while (std::getline(ss, c, ',')) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw InvalidArgument("csv: bad number '" + c + "'");
      }
    }
    if (row.size() != t.columns.size()) throw InvalidArgument("csv: row width does not match header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Sheets and locus

inline CsvTable sheet_table(const SheetGrid& g) {
  CsvTable t{{"gamma", "h", "re_E1", "im_E1", "re_E2", "im_E2", "re_E3", "im_E3", "branch_flag"}, {}};
  for (std::size_t j = 0; j < g.hs.size(); ++j)
    for (std::size_t i = 0; i < g.gammas.size(); ++i) {
      const auto idx = g.index(i, j);
      t.rows.push_back({g.gammas[i], g.hs[j], g.sheets[0][idx].real(), g.sheets[0][idx].imag(),
                        g.sheets[1][idx].real(), g.sheets[1][idx].imag(), g.sheets[2][idx].real(),
                        g.sheets[2][idx].imag(), static_cast<double>(g.branch_flag[idx])});
    }
  return t;
}

inline CsvTable locus_table(const std::vector<LocusPoint>& pts) {
  CsvTable t{{"gamma", "h", "r1_residual"}, {}};
  for (const auto& p : pts) t.rows.push_back({p.gamma, p.h, p.r1_residual});
  return t;
}

inline std::vector<LocusPoint> locus_from_table(const CsvTable& t) {
  std::vector<LocusPoint> out;
  const auto g = t.col("gamma"), h = t.col("h"), r = t.col("r1_residual");
  for (const auto& row : t.rows) out.push_back({row[g], row[h], row[r]});
  return out;
}

// Evolution traces

inline CsvTable trace_table(const EvolutionTrace& tr) {
  CsvTable t{{"t_us", "p0", "norm", "re_c1", "im_c1", "re_c2", "im_c2", "re_c3", "im_c3"}, {}};
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const auto& v = tr.raw_states[k];
    t.rows.push_back({tr.times[k] * 1e6, tr.p0[k], tr.norm[k], v(0).real(), v(0).imag(), v(1).real(), v(1).imag(),
                      v(2).real(), v(2).imag()});
  }
  return t;
}

inline EvolutionTrace trace_from_table(const CsvTable& t) {
  EvolutionTrace tr;
  const auto ct = t.col("t_us"), cp = t.col("p0"), cn = t.col("norm");
  const auto c1 = t.col("re_c1");
  for (const auto& r : t.rows) {
    tr.times.push_back(r[ct] * 1e-6);
    tr.p0.push_back(r[cp]);
    tr.norm.push_back(r[cn]);
    tr.raw_states.push_back(Vec3(cplx(r[c1], r[c1 + 1]), cplx(r[c1 + 2], r[c1 + 3]), cplx(r[c1 + 4], r[c1 + 5])));
  }
  return tr;
}

/// (t, value) series such as conserved-quantity samples: columns t_us, value.
inline CsvTable series_table(const std::vector<double>& times, const std::vector<double>& values) {
  CsvTable t{{"t_us", "value"}, {}};
  for (std::size_t k = 0; k < times.size(); ++k) t.rows.push_back({times[k] * 1e6, values[k]});
  return t;
}

// Pulse schedules

inline CsvTable pulse_table(const PulseSchedule& ps) {
  CsvTable t;
  t.columns.push_back("t_us");
  for (Channel c : kChannels) {
    const std::string n = to_string(c);
    t.columns.push_back(n + "_Omega_kHz");
    t.columns.push_back(n + "_phi_rad");
    t.columns.push_back(n + "_omega_MHz");
  }
  for (std::size_t k = 0; k < ps.times.size(); ++k) {
    std::vector<double> row{ps.times[k] * 1e6};
    for (Channel c : kChannels) {
      const auto& ch = ps[c];
      row.push_back(ch.omega_amp_hz[k] * 1e-3);
      row.push_back(ch.phase_rad[k]);
      row.push_back(ch.carrier_rad_s[k] / kTwoPi * 1e-6);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// JSON

inline json to_json_value(const NVConfig& c) {
  return {{"D_hz", c.D_hz},
          {"Q_hz", c.Q_hz},
          {"A_hz", c.A_hz},
          {"B_gauss", c.B_gauss},
          {"gamma_e_hz_per_gauss", c.gamma_e_hz_per_gauss},
          {"gamma_n_hz_per_gauss", c.gamma_n_hz_per_gauss}};
}

namespace detail {
template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: key '") + key + "': " + e.what());
  }
}
}  // namespace detail

/// Missing keys keep their defaults.  Accepts the keys at top level or
/// under "nv_levels".
inline NVConfig nv_config_from_json(const json& doc) {
  const json& j = doc.contains("nv_levels") ? doc.at("nv_levels") : doc;
  NVConfig c;
  detail::read_key(j, "D_hz", c.D_hz);
  detail::read_key(j, "Q_hz", c.Q_hz);
  detail::read_key(j, "A_hz", c.A_hz);
  detail::read_key(j, "B_gauss", c.B_gauss);
  detail::read_key(j, "gamma_e_hz_per_gauss", c.gamma_e_hz_per_gauss);
  detail::read_key(j, "gamma_n_hz_per_gauss", c.gamma_n_hz_per_gauss);
  return c;
}

inline json to_json_value(const ReadoutModel& m) {
  return {{"L_cps", m.L},           {"S", m.S},       {"shot_noise", m.shot_noise},
          {"averages", m.averages}, {"seed", m.seed}, {"readout_window_s", m.readout_window_s}};
}

/// Keys at top level or under "readout".
inline ReadoutModel readout_from_json(const json& doc) {
  const json& j = doc.contains("readout") ? doc.at("readout") : doc;
  ReadoutModel m;
  detail::read_key(j, "L_cps", m.L);
  detail::read_key(j, "S", m.S);
  detail::read_key(j, "shot_noise", m.shot_noise);
  detail::read_key(j, "averages", m.averages);
  detail::read_key(j, "seed", m.seed);
  detail::read_key(j, "readout_window_s", m.readout_window_s);
  m.validate();
  return m;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

inline json to_json_value(const NVLevels& nv) {
  json j = to_json_value(nv.config);
  j["omega_rad_s"] = {{"w12", nv.omega.w12}, {"w23", nv.omega.w23}, {"w13", nv.omega.w13},
                      {"w45", nv.omega.w45}, {"w56", nv.omega.w56}, {"w46", nv.omega.w46}};
  return j;
}

inline json to_json_value(const EPClass& c) {
  return {{"kind", to_string(c.kind)}, {"gamma", c.gamma}, {"h", c.h}, {"r1_abs", c.r1_abs}, {"r2_abs", c.r2_abs}};
}

inline json to_json_value(const ParamEstimate& e) { return {{"value", e.value}, {"sigma", e.sigma}}; }

inline ParamEstimate estimate_from_json(const json& j, const std::string& method) {
  return {j.at("value").get<double>(), j.at("sigma").get<double>(), method};
}

inline json estimates_json(const Retrieval& r, const EigenvalueStats* ev) {
  json j = {{"gamma", to_json_value(r.gamma)},
            {"h", to_json_value(r.h)},
            {"mu", to_json_value(r.mu)},
            {"nu", to_json_value(r.nu)}};
  json evs = json::array();
  if (ev)
    for (int k = 0; k < 3; ++k)
      evs.push_back({{"re", ev->mean[k].real()},
                     {"im", ev->mean[k].imag()},
                     {"re_std", ev->re_std[k]},
                     {"im_std", ev->im_std[k]}});
  j["eigenvalues"] = evs;
  if (ev) {
    j["monte_carlo"] = {{"samples", ev->samples}, {"seed", ev->seed}, {"degenerate", ev->degenerate}};
  }
  return j;
}

/// Largest deviation between blocks rebuilt from the schedule and the
/// Hermitian parts of the blocks computed directly from H.
inline double schedule_reconstruction_error(const PulseSchedule& ps, const Mat3& h) {
  double err = 0.0;
  for (std::size_t k = 0; k < ps.times.size(); ++k) {
    const auto r = reconstruct_blocks(ps, k);
    const Mat6 tot = total_hamiltonian(dilated_blocks(h, ps.times[k], ps.eta0, ps.s));
    err = std::max({err, max_abs(Mat3(r.Gamma - tot.topLeftCorner<3, 3>())),
                    max_abs(Mat3(r.Lambda - tot.bottomRightCorner<3, 3>()))});
  }
  return err;
}

inline json pulse_sidecar(const PulseSchedule& ps, const Mat3& h) {
  double defect = 0.0;
  for (std::size_t k = 0; k < ps.times.size(); ++k) defect = std::max(defect, reconstruct_blocks(ps, k).carrier_defect);
  const double recon = schedule_reconstruction_error(ps, h);
  return {{"eta0", ps.eta0},
          {"s_rad_per_s", ps.s},
          {"nv_levels", to_json_value(ps.nv)},
          {"max_carrier_defect_rad_s", defect},
          {"max_block_reconstruction_error_rad_s", recon}};
}

inline const char* schema_text() {
  return R"(CSV schemas (numbers printed with 17 significant digits)
  sweep:     gamma,h,re_E1,im_E1,re_E2,im_E2,re_E3,im_E3,branch_flag
  locus:     gamma,h,r1_residual
  evolve:    t_us,p0,norm,re_c1,im_c1,re_c2,im_c2,re_c3,im_c3
             norm = <psi(t)|psi(t)>, c_k = components of e^{-i s H t} psi
  pulses:    t_us, then per channel X in MW1,MW2,MW3,MW4,EF1,EF2:
             X_Omega_kHz, X_phi_rad, X_omega_MHz (carrier / 2pi)
  conserved: t_us,value
  eigenstates: k,re_E,im_E,F_k1,F_k2,F_k3,degenerate (F NaN when degenerate)
  dispersion: mu,splitting,re_eps_plus,im_eps_plus,re_eps_minus,im_eps_minus
pulses JSON sidecar: {eta0, s_rad_per_s, nv_levels, max_carrier_defect_rad_s,
                      max_block_reconstruction_error_rad_s}
config JSON (all keys optional; top level or under "nv_levels" / "readout"):
  nv_levels: D_hz, Q_hz, A_hz, B_gauss, gamma_e_hz_per_gauss, gamma_n_hz_per_gauss
  readout:   L_cps[6], S, shot_noise, averages, seed, readout_window_s
retrieve inputs (CSV): --traces A B with t_us,p0[,sigma]; --cpt and --cpsch with
                      t_us,value[,sigma]; the simulate subcommand writes all four
estimates JSON: {gamma:{value,sigma}, h:{...}, mu:{...}, nu:{...},
                 eigenvalues:[{re,im,re_std,im_std}], monte_carlo:{samples,seed,degenerate}}
)";
}

}  // namespace nhep
