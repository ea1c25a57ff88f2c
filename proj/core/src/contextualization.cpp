#include "mmdyn/contextualization.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "kernels.hpp"
#include "mmdyn/error.hpp"
#include "mmdyn/parallel.hpp"

namespace mmdyn {

std::string_view to_string(CurveKind kind) noexcept {
  switch (kind) {
    case CurveKind::Inter: return "inter";
    case CurveKind::IntraVisual: return "intra_visual";
    case CurveKind::IntraText: return "intra_text";
  }
  return "?";
}

std::string_view to_string(Direction d) noexcept {
  return d == Direction::Rising ? "rising" : "falling";
}

std::string_view to_string(PhaseLabel p) noexcept {
  static constexpr std::string_view kNames[] = {"I", "II", "III", "IV"};
  return kNames[static_cast<int>(p)];
}

namespace {

void check_span(const MatrixView& hidden, const TokenSpan& span, std::string_view name) {
  if (span.empty() || span.end > hidden.rows()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} span [{}, {}) outside {} rows", name, span.start, span.end, hidden.rows()));
  }
}

std::vector<double> row_norms(const MatrixView& hidden, const TokenSpan& span) {
  std::vector<double> norms(span.size());
  for (std::size_t i = 0; i < span.size(); ++i) {
    norms[i] = std::sqrt(detail::squared_norm(hidden.row(span.start + i)));
    if (!(norms[i] > kMinTokenNorm)) {
      throw Error(ErrorCode::ZeroVector,
                  fmt::format("token {} has norm {:g}", span.start + i, norms[i]));
    }
  }
  return norms;
}

double clamped_cosine(std::span<const float> x, std::span<const float> y, double nx, double ny) {
  return std::clamp(detail::dot(x, y) / (nx * ny), -1.0, 1.0);
}

}  // namespace

double inter_modal_similarity(const MatrixView& hidden, const ModalitySpan& spans) {
  check_span(hidden, spans.visual, "visual");
  check_span(hidden, spans.text, "text");
  const auto nv = row_norms(hidden, spans.visual);
  const auto nt = row_norms(hidden, spans.text);
  double sum = 0.0;
  for (std::size_t i = 0; i < nv.size(); ++i) {
    const auto v = hidden.row(spans.visual.start + i);
    for (std::size_t j = 0; j < nt.size(); ++j) {
      sum += clamped_cosine(v, hidden.row(spans.text.start + j), nv[i], nt[j]);
    }
  }
  return sum / (static_cast<double>(nv.size()) * static_cast<double>(nt.size()));
}

double intra_modal_similarity(const MatrixView& hidden, const TokenSpan& span) {
  if (span.size() < 2) {
    throw Error(ErrorCode::SpanTooSmall, fmt::format("span [{}, {}) has fewer than 2 tokens", span.start, span.end));
  }
  check_span(hidden, span, "intra");
  const auto norms = row_norms(hidden, span);
  const std::size_t k = span.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto x = hidden.row(span.start + i);
    for (std::size_t j = i + 1; j < k; ++j) {
      sum += clamped_cosine(x, hidden.row(span.start + j), norms[i], norms[j]);
    }
  }
  return 2.0 * sum / (static_cast<double>(k) * static_cast<double>(k - 1));
}

SimilarityCurve similarity_curve(const Dump& dump, CurveKind kind, unsigned threads) {
  SimilarityCurve curve;
  curve.kind = kind;
  curve.values.resize(dump.num_layers() + 1);
  parallel_for(curve.values.size(), threads, [&](std::size_t l) {
    try {
      const Tensor hidden = dump.hidden(l);
      const MatrixView h = hidden.matrix();
      switch (kind) {
        case CurveKind::Inter: curve.values[l] = inter_modal_similarity(h, dump.spans()); break;
        case CurveKind::IntraVisual: curve.values[l] = intra_modal_similarity(h, dump.spans().visual); break;
        case CurveKind::IntraText: curve.values[l] = intra_modal_similarity(h, dump.spans().text); break;
      }
    } catch (const Error& e) {
      throw e.annotate(fmt::format("layer {}", l));
    }
  });
  return curve;
}

SimilarityCurve aggregate_curves(std::span<const SimilarityCurve> curves) {
  if (curves.empty()) throw Error(ErrorCode::InvalidArgument, "aggregate_curves: no curves");
  const SimilarityCurve& first = curves.front();
  for (const auto& c : curves) {
    if (c.kind != first.kind) {
      throw Error(ErrorCode::MixedKinds,
                  fmt::format("cannot aggregate {} with {}", to_string(first.kind), to_string(c.kind)));
    }
    if (c.values.size() != first.values.size()) {
      throw Error(ErrorCode::LengthMismatch,
                  fmt::format("curve lengths {} and {}", first.values.size(), c.values.size()));
    }
  }
  const std::size_t n = first.values.size();
  const double count = static_cast<double>(curves.size());
  SimilarityCurve out;
  out.kind = first.kind;
  out.values.assign(n, 0.0);
  out.sample_count = 0;
  std::vector<double> sigma(n, 0.0);
  for (const auto& c : curves) {
    out.sample_count += c.sample_count;
    for (std::size_t l = 0; l < n; ++l) out.values[l] += c.values[l];
  }
  for (double& v : out.values) v /= count;
  for (const auto& c : curves) {
    for (std::size_t l = 0; l < n; ++l) {
      const double dev = c.values[l] - out.values[l];
      sigma[l] += dev * dev;
    }
  }
  for (double& s : sigma) s = std::sqrt(s / count);
  out.stddev = std::move(sigma);
  return out;
}

namespace {

struct Run {
  std::size_t first_step;  // index into the difference series
  std::size_t last_step;
  int sign;
  double variation;
};

std::vector<double> smooth(std::span<const double> values, std::size_t window) {
  const std::size_t n = values.size();
  const std::size_t half = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += values[k];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

void coalesce(std::vector<Run>& runs) {
  std::vector<Run> out;
  for (const Run& r : runs) {
    if (!out.empty() && out.back().sign == r.sign) {
      out.back().last_step = r.last_step;
      out.back().variation += r.variation;
    } else {
      out.push_back(r);
    }
  }
  runs = std::move(out);
}

}  // namespace

PhaseDiagram segment_phases(std::span<const double> values, const PhaseConfig& cfg) {
  if (cfg.target_phases < 1) throw Error(ErrorCode::InvalidArgument, "target_phases must be >= 1");
  if (cfg.smooth_window < 1 || cfg.smooth_window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("smooth_window {} must be odd and >= 1", cfg.smooth_window));
  }
  if (!(cfg.deadband >= 0.0)) throw Error(ErrorCode::InvalidArgument, "deadband must be >= 0");
  if (values.size() < cfg.target_phases + 1) {
    throw Error(ErrorCode::TooShort, fmt::format("curve of length {} cannot hold {} phases", values.size(),
                                                 cfg.target_phases));
  }

  const std::vector<double> s = smooth(values, cfg.smooth_window);
  const std::size_t steps = s.size() - 1;
  std::vector<double> delta(steps);
  for (std::size_t t = 0; t < steps; ++t) delta[t] = s[t + 1] - s[t];

  std::vector<int> sign(steps, 0);
  int current = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    if (std::abs(delta[t]) > cfg.deadband) {
      current = delta[t] > 0.0 ? 1 : -1;
      if (sign[0] == 0) std::fill(sign.begin(), sign.begin() + static_cast<std::ptrdiff_t>(t), current);
    }
    sign[t] = current;
  }
  if (current == 0) {
    // No decisive step: one phase in the direction of the net change.
    std::fill(sign.begin(), sign.end(), s.back() >= s.front() ? 1 : -1);
  }

  std::vector<Run> runs;
  for (std::size_t t = 0; t < steps; ++t) {
    runs.push_back({t, t, sign[t], std::abs(delta[t])});
  }
  coalesce(runs);

  while (runs.size() > cfg.target_phases) {
    std::size_t weakest = 0;
    for (std::size_t k = 1; k < runs.size(); ++k) {
      if (runs[k].variation < runs[weakest].variation) weakest = k;
    }
    std::size_t into;
    if (weakest == 0) {
      into = 1;
    } else if (weakest + 1 == runs.size()) {
      into = weakest - 1;
    } else {
      into = runs[weakest + 1].variation > runs[weakest - 1].variation ? weakest + 1 : weakest - 1;
    }
    runs[weakest].sign = runs[into].sign;
    coalesce(runs);
  }

  PhaseDiagram diagram;
  for (const Run& r : runs) {
    Phase p;
    p.start = r.first_step;
    p.end = r.last_step + 1;
    p.direction = r.sign > 0 ? Direction::Rising : Direction::Falling;
    diagram.phases.push_back(p);
  }
  for (std::size_t k = 1; k < diagram.phases.size(); ++k) diagram.boundaries.push_back(diagram.phases[k].start);

  static constexpr Direction kCanonical[] = {Direction::Rising, Direction::Falling, Direction::Rising,
                                             Direction::Falling};
  diagram.canonical = diagram.phases.size() == 4 &&
                      std::equal(diagram.phases.begin(), diagram.phases.end(), std::begin(kCanonical),
                                 [](const Phase& p, Direction d) { return p.direction == d; });
  if (diagram.canonical) {
    for (std::size_t k = 0; k < 4; ++k) diagram.phases[k].label = static_cast<PhaseLabel>(k);
  }
  return diagram;
}

PhaseDiagram segment_phases(const SimilarityCurve& curve, const PhaseConfig& cfg) {
  return segment_phases(std::span<const double>(curve.values), cfg);
}

std::string curve_to_csv(const SimilarityCurve& curve) {
  std::string out = "layer,value,stddev,sample_count\n";
  for (std::size_t l = 0; l < curve.values.size(); ++l) {
    const double sd = curve.stddev ? (*curve.stddev)[l] : 0.0;
    out += fmt::format("{},{},{},{}\n", l, curve.values[l], sd, curve.sample_count);
  }
  return out;
}

std::string phase_diagram_to_json(const PhaseDiagram& diagram) {
  nlohmann::ordered_json doc;
  doc["boundaries"] = diagram.boundaries;
  doc["phases"] = nlohmann::ordered_json::array();
  for (const Phase& p : diagram.phases) {
    nlohmann::ordered_json item;
    item["start"] = p.start;
    item["end"] = p.end;
    item["direction"] = std::string(to_string(p.direction));
    item["label"] = p.label ? nlohmann::ordered_json(std::string(to_string(*p.label))) : nlohmann::ordered_json(nullptr);
    doc["phases"].push_back(std::move(item));
  }
  doc["canonical"] = diagram.canonical;
  return doc.dump(2) + "\n";
}

}  // namespace mmdyn
