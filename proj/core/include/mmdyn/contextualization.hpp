#pragma once

// Contextualization: mean pairwise cosine similarity between token hidden
// states, across modalities (visual x text) or within one span, per layer.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmdyn/dump_io.hpp"
#include "mmdyn/tensor.hpp"

namespace mmdyn {

/// Token vectors with norm at or below this are rejected with ZeroVector.
inline constexpr double kMinTokenNorm = 1e-12;

enum class CurveKind { Inter, IntraVisual, IntraText };

std::string_view to_string(CurveKind kind) noexcept;

struct SimilarityCurve {
  CurveKind kind = CurveKind::Inter;
  std::vector<double> values;  // indexed by layer 0..L
  std::size_t sample_count = 1;
  std::optional<std::vector<double>> stddev;
};

/// (1 / (m n)) * sum_i sum_j cos(v_i, w_j) over visual rows i and text rows j,
/// accumulated in double with i outer, j inner.
double inter_modal_similarity(const MatrixView& hidden, const ModalitySpan& spans);

/// Mean cosine over unordered pairs i < j inside `span`; needs span size >= 2.
double intra_modal_similarity(const MatrixView& hidden, const TokenSpan& span);

/// Applies the per-layer measure to all L + 1 hidden-state tensors. Layers
/// run in parallel; each layer's value does not depend on `threads`.
SimilarityCurve similarity_curve(const Dump& dump, CurveKind kind, unsigned threads = 1);

/// Per-layer arithmetic mean (input order) with population stddev.
SimilarityCurve aggregate_curves(std::span<const SimilarityCurve> curves);

enum class Direction { Rising, Falling };
enum class PhaseLabel { I, II, III, IV };

std::string_view to_string(Direction d) noexcept;
std::string_view to_string(PhaseLabel p) noexcept;

struct PhaseConfig {
  std::size_t smooth_window = 3;  // odd, >= 1
  double deadband = 0.002;
  std::size_t target_phases = 4;
};

struct Phase {
  std::size_t start = 0;  // layer index, inclusive
  std::size_t end = 0;    // layer index, inclusive; equals the next phase's start
  Direction direction = Direction::Rising;
  std::optional<PhaseLabel> label;
};

struct PhaseDiagram {
  std::vector<std::size_t> boundaries;
  std::vector<Phase> phases;
  bool canonical = false;  // rising, falling, rising, falling
};

/// Splits a curve into monotone intervals:
///  1. centered moving average (window truncated at the edges),
///  2. first differences,
///  3. sign per step; |step| <= deadband inherits the previous sign and a
///     leading flat run takes the first decisive sign,
///  4. runs of equal sign become intervals,
///  5. while there are more than target_phases intervals, the one with the
///     smallest total |variation| is absorbed by its larger-variation
///     neighbour (equal-direction neighbours then coalesce),
///  6. labels I..IV iff the result is rising, falling, rising, falling.
PhaseDiagram segment_phases(std::span<const double> values, const PhaseConfig& cfg = {});
PhaseDiagram segment_phases(const SimilarityCurve& curve, const PhaseConfig& cfg = {});

/// `layer,value,stddev,sample_count` with a header row.
std::string curve_to_csv(const SimilarityCurve& curve);

/// `{boundaries, phases[], canonical}`.
std::string phase_diagram_to_json(const PhaseDiagram& diagram);

}  // namespace mmdyn
