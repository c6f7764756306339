#include "mfclt/model.hpp"

namespace mfclt {

Vec b3_centered(const ModelSpec& spec, const Vec& x, const Vec& y, const MeasureView& view,
                const Vec& xt) {
  Vec mean = Vec::Zero(spec.dim_x);
  const int n = view.count();
  for (int i = 0; i < n; ++i) mean += spec.derivatives.b3(x, y, view, view.point(i));
  mean /= static_cast<double>(n);
  return spec.derivatives.b3(x, y, view, xt) - mean;
}

Vec b03_cloud_mean(const ModelSpec& spec, const Vec& y, const MeasureView& view) {
  Vec mean = Vec::Zero(spec.dim_y);
  const int n = view.count();
  for (int i = 0; i < n; ++i) mean += spec.derivatives.b03(y, view, view.point(i));
  mean /= static_cast<double>(n);
  return mean;
}

Vec b03_centered(const ModelSpec& spec, const Vec& y, const MeasureView& view, const Vec& xt) {
  return spec.derivatives.b03(y, view, xt) - b03_cloud_mean(spec, y, view);
}

double d3_centered(const ModelSpec& spec, const Vec& x, const Vec& y, const Vec& h,
                   const MeasureView& view, const Vec& xt) {
  double mean = 0.0;
  const int n = view.count();
  for (int i = 0; i < n; ++i) mean += spec.derivatives.d3(x, y, h, view, view.point(i));
  mean /= static_cast<double>(n);
  return spec.derivatives.d3(x, y, h, view, xt) - mean;
}

bool ValidationReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string ValidationReport::to_json() const {
  std::string out = "{\n  \"all_pass\": ";
  out += all_pass() ? "true" : "false";
  out += ",\n  \"checks\": [\n";
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto& c = checks[i];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", c.statistic);
    out += "    {\"id\": \"" + json_escape(c.id) + "\", \"pass\": " + (c.pass ? "true" : "false") +
           ", \"statistic\": " + buf + ", \"detail\": \"" + json_escape(c.detail) + "\"}";
    out += (i + 1 < checks.size()) ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

}  // namespace mfclt
