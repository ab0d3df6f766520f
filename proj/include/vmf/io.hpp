#pragma once
// Artifact serialization: field snapshots as x,y,value CSV and report JSON.
// JSON output uses an ordered emitter with doubles fixed at 17 significant
// digits so identical runs produce byte-identical files; non-finite values
// serialize as null.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vmf/blowup.hpp"
#include "vmf/domain.hpp"
#include "vmf/kirchhoff.hpp"
#include "vmf/solver.hpp"

namespace vmf {

inline std::string format_g17(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Json {
 public:
  Json() : kind_(Kind::Null) {}
  Json(bool b) : kind_(Kind::Bool), bool_(b) {}
  Json(int v) : kind_(Kind::Int), int_(v) {}
  Json(long v) : kind_(Kind::Int), int_(v) {}
  Json(long long v) : kind_(Kind::Int), int_(v) {}
  Json(unsigned long long v) : kind_(Kind::Int), int_(static_cast<long long>(v)) {}
  Json(double v) : kind_(Kind::Double), double_(v) {}
  Json(const char* s) : kind_(Kind::String), string_(s) {}
  Json(std::string s) : kind_(Kind::String), string_(std::move(s)) {}

  static Json object() {
    Json j;
    j.kind_ = Kind::Object;
    return j;
  }
  static Json array() {
    Json j;
    j.kind_ = Kind::Array;
    return j;
  }

  Json& set(const std::string& key, Json value) {
    if (kind_ != Kind::Object) throw std::logic_error("Json: set on non-object");
    members_.emplace_back(key, std::move(value));
    return *this;
  }
  Json& push(Json value) {
    if (kind_ != Kind::Array) throw std::logic_error("Json: push on non-array");
    items_.push_back(std::move(value));
    return *this;
  }

  std::string dump(int indent = 2) const {
    std::string out;
    write(out, indent, 0);
    out += '\n';
    return out;
  }

 private:
  enum class Kind { Null, Bool, Int, Double, String, Array, Object };

  static void escape(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
          } else {
            out += c;
          }
      }
    }
    out += '"';
  }

  void write(std::string& out, int indent, int depth) const {
    const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
    switch (kind_) {
      case Kind::Null: out += "null"; break;
      case Kind::Bool: out += bool_ ? "true" : "false"; break;
      case Kind::Int: out += std::to_string(int_); break;
      case Kind::Double: out += format_g17(double_); break;
      case Kind::String: escape(out, string_); break;
      case Kind::Array:
        if (items_.empty()) {
          out += "[]";
          break;
        }
        out += "[\n";
        for (std::size_t i = 0; i < items_.size(); ++i) {
          out += pad;
          items_[i].write(out, indent, depth + 1);
          out += i + 1 < items_.size() ? ",\n" : "\n";
        }
        out += close_pad + "]";
        break;
      case Kind::Object:
        if (members_.empty()) {
          out += "{}";
          break;
        }
        out += "{\n";
        for (std::size_t i = 0; i < members_.size(); ++i) {
          out += pad;
          escape(out, members_[i].first);
          out += ": ";
          members_[i].second.write(out, indent, depth + 1);
          out += i + 1 < members_.size() ? ",\n" : "\n";
        }
        out += close_pad + "}";
        break;
    }
  }

  Kind kind_;
  bool bool_ = false;
  long long int_ = 0;
  double double_ = 0.0;
  std::string string_;
  std::vector<Json> items_;
  std::vector<std::pair<std::string, Json>> members_;
};

inline Json json_list(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) a.push(x);
  return a;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Field snapshot: header line, then one x,y,value row per grid node in node
// order, all at 17 significant digits.
inline void write_field_csv(const std::string& path, const Grid& g, const Field& v) {
  if (static_cast<int>(v.size()) != g.count())
    throw std::invalid_argument("write_field_csv: field/grid size mismatch");
  std::string out = "x,y,value\n";
  for (int q = 0; q < g.count(); ++q) {
    out += format_g17(g.xs[q]);
    out += ',';
    out += format_g17(g.ys[q]);
    out += ',';
    out += format_g17(v[q]);
    out += '\n';
  }
  write_text(path, out);
}

// Reads a snapshot back onto `g`. Every row must land exactly on a grid node
// and every node must be covered, so a snapshot written at a different
// resolution is rejected rather than resampled.
inline Field read_field_csv(const std::string& path, const Grid& g) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open snapshot: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,y,value", 0) != 0)
    throw std::runtime_error("snapshot missing x,y,value header: " + path);
  Field v(g.count(), 0.0);
  std::vector<char> seen(static_cast<std::size_t>(g.count()), 0);
  int rows = 0;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    double x, y, val;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &val) != 3)
      throw std::runtime_error("snapshot parse error at " + path + ":" +
                               std::to_string(ln));
    int i = static_cast<int>(std::lround((x - g.ox) / g.h));
    int j = static_cast<int>(std::lround((y - g.oy) / g.h));
    int q = g.node_of_site(i, j);
    if (q < 0 || std::abs(g.xs[q] - x) > 1e-9 * std::max(1.0, std::abs(x)) ||
        std::abs(g.ys[q] - y) > 1e-9 * std::max(1.0, std::abs(y)))
      throw std::runtime_error("snapshot node mismatch (wrong grid?) at " + path +
                               ":" + std::to_string(ln));
    v[static_cast<std::size_t>(q)] = val;
    seen[static_cast<std::size_t>(q)] = 1;
    ++rows;
  }
  if (rows != g.count())
    throw std::runtime_error("snapshot covers " + std::to_string(rows) + " of " +
                             std::to_string(g.count()) + " nodes (wrong grid?): " + path);
  for (int q = 0; q < g.count(); ++q)
    if (!seen[static_cast<std::size_t>(q)])
      throw std::runtime_error("snapshot misses grid nodes (wrong grid?): " + path);
  return v;
}

inline Json solve_summary_json(double lambda, const NewtonResult& r, const Grid& g) {
  double vmax = 0.0, vmin = 0.0;
  int arg = 0;
  for (int q = 0; q < g.count(); ++q) {
    vmax = std::max(vmax, r.v[q]);
    vmin = std::min(vmin, r.v[q]);
    if (std::abs(r.v[q]) > std::abs(r.v[arg])) arg = q;
  }
  Json j = Json::object();
  j.set("lambda", lambda);
  j.set("converged", r.converged);
  j.set("newton_iters", r.iterations);
  j.set("residual_norm", r.residual_norm);
  j.set("max_v", vmax);
  j.set("min_v", vmin);
  Json peak = Json::array();
  peak.push(g.xs[arg]);
  peak.push(g.ys[arg]);
  j.set("peak", std::move(peak));
  j.set("denominator", r.denominator);
  j.set("atom_denominators", json_list(r.atom_denominators));
  j.set("message", r.message);
  return j;
}

inline Json blowup_report_json(const BlowupReport& rep, int n) {
  Json j = Json::object();
  j.set("variant", rep.variant);
  j.set("lambda", rep.lambda);
  j.set("n", n);
  Json peaks = Json::array();
  for (const PeakReport& p : rep.peaks) {
    Json e = Json::object();
    e.set("x", p.peak.x);
    e.set("y", p.peak.y);
    e.set("sign", p.peak.sign);
    e.set("height", p.peak.height);
    e.set("ball_radius", p.radius);
    e.set("alt_radius", p.alt_radius);
    e.set("m_plus", p.m_plus);
    e.set("m_minus", p.m_minus);
    e.set("m_plus_alt", p.m_plus_alt);
    e.set("m_minus_alt", p.m_minus_alt);
    e.set("m_plus_limit", p.m_plus_limit);
    e.set("m_minus_limit", p.m_minus_limit);
    e.set("mass_relation_residual", p.mass_relation_residual);
    e.set("location_residual", p.location_residual);
    e.set("region", p.region);
    peaks.push(std::move(e));
  }
  j.set("peaks", std::move(peaks));
  j.set("rv_sup_error", rep.rv_sup_error);
  j.set("rv_exclusion_radius", rep.rv_exclusion_radius);
  j.set("rv_mass_mode", rep.rv_mass_mode);
  j.set("min_boundary_distance", rep.min_boundary_distance);
  Json poh = Json::array();
  for (std::size_t i = 0; i < rep.pohozaev.size(); ++i) {
    Json e = Json::object();
    e.set("radius", rep.pohozaev_radii[i]);
    e.set("residual", rep.pohozaev[i]);
    poh.push(std::move(e));
  }
  j.set("pohozaev", std::move(poh));
  j.set("pohozaev_form", rep.pohozaev_form);
  j.set("denominator", rep.denominator);
  j.set("atom_denominators", json_list(rep.atom_denominators));
  return j;
}

inline Json critical_json(const VortexConfig& start, const VortexConfig& final_config,
                          double h_value, const CriticalityReport& rep,
                          const std::vector<double>& loc_residuals) {
  auto points_json = [](const std::vector<Vec2>& pts) {
    Json a = Json::array();
    for (const Vec2& p : pts) {
      Json e = Json::array();
      e.push(p.x);
      e.push(p.y);
      a.push(std::move(e));
    }
    return a;
  };
  Json j = Json::object();
  j.set("points", points_json(final_config.points));
  j.set("intensities", json_list(final_config.intensities));
  j.set("hamiltonian", h_value);
  j.set("gradient_norm", rep.gradient_norm);
  j.set("converged", rep.converged);
  j.set("degenerate", rep.degenerate);
  j.set("iterations", rep.iterations);
  j.set("message", rep.message);
  j.set("location_residual", json_list(loc_residuals));
  j.set("start_points", points_json(start.points));
  return j;
}

}  // namespace vmf
