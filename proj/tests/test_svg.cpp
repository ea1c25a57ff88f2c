#include <regex>
#include <sstream>

#include <doctest.h>

#include "mmdyn/error.hpp"
#include "mmdyn/svg.hpp"
#include "support/fixtures.hpp"

using namespace mmdyn;

namespace {

std::vector<svg::Point> polyline_points(const std::string& doc, std::size_t which = 0) {
  static const std::regex kPoly(R"re(<polyline[^>]*points="([^"]*)")re");
  auto it = std::sregex_iterator(doc.begin(), doc.end(), kPoly);
  std::advance(it, static_cast<std::ptrdiff_t>(which));
  REQUIRE(it != std::sregex_iterator());
  std::vector<svg::Point> out;
  std::istringstream in((*it)[1].str());
  std::string pair;
  while (in >> pair) {
    const auto comma = pair.find(',');
    out.push_back({std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1))});
  }
  return out;
}

std::vector<int> cell_grays(const std::string& doc) {
  static const std::regex kCell(R"re(<rect x="[^"]*" y="[^"]*" width="[^"]*" height="[^"]*" fill="rgb\((\d+),(\d+),(\d+)\)")re");
  std::vector<int> out;
  for (auto it = std::sregex_iterator(doc.begin(), doc.end(), kCell); it != std::sregex_iterator(); ++it) {
    CHECK((*it)[1] == (*it)[2]);
    CHECK((*it)[2] == (*it)[3]);
    out.push_back(std::stoi((*it)[1].str()));
  }
  return out;
}

std::size_t count(const std::string& doc, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = doc.find(needle); pos != std::string::npos; pos = doc.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("line_chart document structure") {
  const std::vector<svg::Series> series{{"inter", {0.1, 0.3, 0.2}}, {"intra", {0.5, 0.6, 0.7}}};
  const std::vector<std::size_t> markers{1};
  const std::string doc = svg::line_chart(series, "cosine similarity", "title", markers);
  CHECK(doc.rfind("<?xml", 0) == 0);
  CHECK(doc.find("<svg xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos);
  CHECK(doc.find("width=\"800\"") != std::string::npos);
  CHECK(doc.find("height=\"500\"") != std::string::npos);
  CHECK(doc.find(">layer</text>") != std::string::npos);
  CHECK(doc.find(">cosine similarity</text>") != std::string::npos);
  CHECK(count(doc, "<polyline") == 2);
  CHECK(count(doc, "class=\"marker\"") == 1);
  CHECK(doc.find("data-series=\"intra\"") != std::string::npos);
  CHECK(doc.substr(doc.size() - 7) == "</svg>\n");
  CHECK(polyline_points(doc).size() == 3);
}

TEST_CASE("line_chart of a constant curve is horizontal") {
  const std::vector<svg::Series> series{{"flat", std::vector<double>(9, 0.42)}};
  const auto pts = polyline_points(svg::line_chart(series, "v"));
  REQUIRE(pts.size() == 9);
  for (const auto& p : pts) CHECK(p.y == pts[0].y);
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].x > pts[i - 1].x);
}

TEST_CASE("line_chart extrema sit at the curve's turning points") {
  const std::vector<svg::Series> series{{"inter", fixtures::four_phase_curve(32, 3, 10, 28)}};
  const auto pts = polyline_points(svg::line_chart(series, "v"));
  REQUIRE(pts.size() == 33);
  std::vector<std::size_t> turning;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const bool peak = pts[i].y < pts[i - 1].y && pts[i].y < pts[i + 1].y;  // canvas y grows downward
    const bool trough = pts[i].y > pts[i - 1].y && pts[i].y > pts[i + 1].y;
    if (peak || trough) turning.push_back(i);
  }
  CHECK(turning == std::vector<std::size_t>{3, 10, 28});
  const auto top = std::min_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.y < b.y; });
  CHECK(top - pts.begin() == 28);
}

TEST_CASE("heatmap maps the maximum to black") {
  const std::vector<std::vector<double>> checker{{0, 1}, {1, 0}};
  const std::vector<std::size_t> rows{1, 2};
  const std::string doc = svg::heatmap(checker, rows, "layer", "token");
  CHECK(cell_grays(doc) == std::vector<int>{255, 0, 0, 255});
  CHECK(doc.find(">layer</text>") != std::string::npos);
  CHECK(doc.find(">token</text>") != std::string::npos);
}

TEST_CASE("gray_level") {
  CHECK(svg::gray_level(1.0, 0.0, 1.0) == 0);
  CHECK(svg::gray_level(0.0, 0.0, 1.0) == 255);
  CHECK(svg::gray_level(0.5, 0.0, 1.0) == 128);
  const int flat = svg::gray_level(3.0, 3.0, 3.0);
  CHECK(flat >= 0);
  CHECK(flat <= 255);
}

TEST_CASE("empty input is rejected") {
  CHECK_THROWS_AS(svg::line_chart({}, "v"), Error);
  const std::vector<svg::Series> hollow{{"x", {}}};
  CHECK_THROWS_AS(svg::line_chart(hollow, "v"), Error);
  CHECK_THROWS_AS(svg::heatmap({}, {}, "r", "c"), Error);
}
