#include "qell/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qell {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << text;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepDataset& ds) {
  std::ostringstream out;
  out << "angle_rad,counts,integration_s\n";
  for (const auto& r : ds.records) {
    out << format_double(r.angle_rad) << ',' << format_double(r.counts) << ','
        << format_double(r.integration_s) << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

const char* mode_name(Mode m) { return m == Mode::quantum ? "quantum" : "classical"; }
const char* parameter_name(SweptParameter p) {
  return p == SweptParameter::idler_hwp ? "idler_hwp" : "analyzer";
}
const char* port_name(Port p) { return p == Port::transmitted ? "transmitted" : "reflected"; }

Mode mode_from(const std::string& s) {
  if (s == "quantum") return Mode::quantum;
  if (s == "classical") return Mode::classical;
  throw std::invalid_argument("unknown mode: " + s);
}
SweptParameter parameter_from(const std::string& s) {
  if (s == "idler_hwp") return SweptParameter::idler_hwp;
  if (s == "analyzer") return SweptParameter::analyzer;
  throw std::invalid_argument("unknown swept parameter: " + s);
}
Port port_from(const std::string& s) {
  if (s == "transmitted") return Port::transmitted;
  if (s == "reflected") return Port::reflected;
  throw std::invalid_argument("unknown port: " + s);
}

}  // namespace

json detection_to_json(const DetectionModel& m) {
  return json{{"pair_rate_cps", m.pair_rate_cps},
              {"efficiency_signal", m.efficiency_signal},
              {"efficiency_idler", m.efficiency_idler},
              {"dark_rate_signal_cps", m.dark_rate_signal_cps},
              {"dark_rate_idler_cps", m.dark_rate_idler_cps},
              {"coincidence_window_s", m.coincidence_window_s},
              {"integration_time_s", m.integration_time_s},
              {"singles_rate_classical_cps", m.singles_rate_classical_cps},
              {"shot_noise", m.shot_noise}};
}

DetectionModel detection_from_json(const json& j) {
  DetectionModel m;
  m.pair_rate_cps = j.value("pair_rate_cps", m.pair_rate_cps);
  m.efficiency_signal = j.value("efficiency_signal", m.efficiency_signal);
  m.efficiency_idler = j.value("efficiency_idler", m.efficiency_idler);
  m.dark_rate_signal_cps = j.value("dark_rate_signal_cps", m.dark_rate_signal_cps);
  m.dark_rate_idler_cps = j.value("dark_rate_idler_cps", m.dark_rate_idler_cps);
  m.coincidence_window_s = j.value("coincidence_window_s", m.coincidence_window_s);
  m.integration_time_s = j.value("integration_time_s", m.integration_time_s);
  m.singles_rate_classical_cps =
      j.value("singles_rate_classical_cps", m.singles_rate_classical_cps);
  m.shot_noise = j.value("shot_noise", m.shot_noise);
  m.validate();
  return m;
}

json sweep_meta_json(const SweepDataset& ds, const std::string& csv_name,
                     const std::string& config_hash) {
  json j{{"schema_version", report_schema_version},
         {"config_hash", config_hash},
         {"seed", ds.seed},
         {"mode", mode_name(ds.mode)},
         {"swept_parameter", parameter_name(ds.parameter)},
         {"shot_noise", ds.shot_noise},
         {"csv", csv_name},
         {"detection", detection_to_json(ds.detection)}};
  if (ds.mode == Mode::quantum) {
    j["analyzer"] = json{{"signal_hwp_rad", ds.analyzer.signal.hwp_rad},
                         {"signal_port", port_name(ds.analyzer.signal.port)},
                         {"idler_port", port_name(ds.analyzer.idler.port)},
                         {"compensator", ds.analyzer.compensator_present},
                         {"compensator_angle_rad", ds.analyzer.compensator_angle_rad}};
  } else {
    j["psa"] = json{{"polarizer_rad", ds.psa.polarizer_rad},
                    {"compensator", ds.psa.compensator_present}};
  }
  if (ds.has_ground_truth) {
    j["ground_truth"] =
        json{{"theta_rad", ds.ground_truth.theta_rad}, {"delta_rad", ds.ground_truth.delta_rad}};
  }
  return j;
}

void write_sweep_meta(const std::filesystem::path& path, const SweepDataset& ds,
                      const std::string& csv_name, const std::string& config_hash) {
  write_text_file(path, sweep_meta_json(ds, csv_name, config_hash).dump(2) + "\n");
}

SweepDataset read_sweep_csv_only(const std::filesystem::path& csv_path) {
  std::istringstream in(read_text_file(csv_path));
  std::string line;
  if (!std::getline(in, line) || line != "angle_rad,counts,integration_s") {
    throw std::invalid_argument("sweep CSV must start with 'angle_rad,counts,integration_s'");
  }
  SweepDataset ds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SweepRecord rec;
    const char* p = line.c_str();
    char* end = nullptr;
    rec.angle_rad = std::strtod(p, &end);
    if (end == p || *end != ',') throw std::invalid_argument("bad CSV row: " + line);
    p = end + 1;
    rec.counts = std::strtod(p, &end);
    if (end == p || *end != ',') throw std::invalid_argument("bad CSV row: " + line);
    p = end + 1;
    rec.integration_s = std::strtod(p, &end);
    if (end == p) throw std::invalid_argument("bad CSV row: " + line);
    if (rec.counts < 0.0) throw std::invalid_argument("counts must be >= 0: " + line);
    ds.records.push_back(rec);
  }
  return ds;
}

SweepDataset read_sweep(const std::filesystem::path& csv_path,
                        const std::filesystem::path& meta_path) {
  SweepDataset ds = read_sweep_csv_only(csv_path);
  const json j = json::parse(read_text_file(meta_path));
  ds.seed = j.value("seed", 0ull);
  ds.mode = mode_from(j.value("mode", "quantum"));
  ds.parameter = parameter_from(j.value("swept_parameter", "idler_hwp"));
  ds.shot_noise = j.value("shot_noise", true);
  if (j.contains("detection")) ds.detection = detection_from_json(j.at("detection"));
  if (j.contains("analyzer")) {
    const json& a = j.at("analyzer");
    ds.analyzer.signal.hwp_rad = a.value("signal_hwp_rad", 0.0);
    ds.analyzer.signal.port = port_from(a.value("signal_port", "transmitted"));
    ds.analyzer.idler.port = port_from(a.value("idler_port", "transmitted"));
    ds.analyzer.compensator_present = a.value("compensator", false);
    ds.analyzer.compensator_angle_rad = a.value("compensator_angle_rad", 0.0);
  }
  if (j.contains("psa")) {
    const json& p = j.at("psa");
    ds.psa.polarizer_rad = p.value("polarizer_rad", 0.0);
    ds.psa.compensator_present = p.value("compensator", false);
  }
  if (j.contains("ground_truth")) {
    ds.has_ground_truth = true;
    ds.ground_truth.theta_rad = j.at("ground_truth").value("theta_rad", 0.0);
    ds.ground_truth.delta_rad = j.at("ground_truth").value("delta_rad", 0.0);
  }
  return ds;
}

json fit_result_to_json(const FitResult& r) {
  const char* status = r.status == FitStatus::converged
                           ? "converged"
                           : (r.status == FitStatus::degenerate_sweep ? "degenerate_sweep"
                                                                      : "non_convergence");
  return json{{"delta_hat_rad", r.delta_hat_rad},
              {"scale_hat", r.scale_hat},
              {"residual_norm", r.residual_norm},
              {"std_error_delta", r.std_error_delta},
              {"std_error_scale", r.std_error_scale},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"status", status}};
}

json sensitivity_to_json(const SensitivityReport& r) {
  return json{{"delta_hats", r.delta_hats},
              {"spread", r.spread},
              {"dependent", r.dependent},
              {"sigma_delta_central", r.sigma_delta_central},
              {"threshold", r.threshold},
              {"failures", r.failures}};
}

void write_tomography_csv(const std::filesystem::path& path, const TomographyCounts& counts) {
  std::ostringstream out;
  out << "basis_signal,basis_idler,counts\n";
  for (int s = 0; s < 6; ++s) {
    for (int i = 0; i < 6; ++i) {
      out << basis_name(tomography_bases[s]) << ',' << basis_name(tomography_bases[i]) << ','
          << format_double(counts.counts(s, i)) << '\n';
    }
  }
  write_text_file(path, out.str());
}

TomographyCounts read_tomography_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "basis_signal,basis_idler,counts") {
    throw std::invalid_argument("tomography CSV must start with 'basis_signal,basis_idler,counts'");
  }
  TomographyCounts out;
  Eigen::Matrix<bool, 6, 6> seen = Eigen::Matrix<bool, 6, 6>::Constant(false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw std::invalid_argument("bad tomography CSV row: " + line);
    }
    const int s = static_cast<int>(basis_from_name(line.substr(0, c1)));
    const int i = static_cast<int>(basis_from_name(line.substr(c1 + 1, c2 - c1 - 1)));
    out.counts(s, i) = std::strtod(line.c_str() + c2 + 1, nullptr);
    seen(s, i) = true;
  }
  if (!seen.all()) throw std::invalid_argument("tomography CSV is missing settings");
  return out;
}

json rho_to_json(const Mat4& rho) {
  json entries = json::array();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      entries.push_back(json::array({rho(i, j).real(), rho(i, j).imag()}));
    }
  }
  return json{{"schema_version", report_schema_version},
              {"basis", "HH,HV,VH,VV"},
              {"layout", "row-major"},
              {"entries", entries}};
}

Mat4 rho_from_json(const json& j) {
  const json& entries = j.at("entries");
  if (entries.size() != 16) throw std::invalid_argument("rho JSON must have 16 entries");
  Mat4 rho;
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) {
      const json& e = entries.at(4 * i + k);
      rho(i, k) = Complex(e.at(0).get<double>(), e.at(1).get<double>());
    }
  }
  return rho;
}

}  // namespace qell
