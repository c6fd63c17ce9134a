#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "synclattice/csv.hpp"
#include "synclattice/svg.hpp"

using namespace synclattice;

namespace {

// Minimal well-formedness check: balanced tags, one root element, quoted attributes.
bool well_formed_xml(const std::string& s, std::string& why) {
  std::vector<std::string> stack;
  std::size_t roots = 0;
  std::size_t pos = 0;
  while ((pos = s.find('<', pos)) != std::string::npos) {
    const auto end = s.find('>', pos);
    if (end == std::string::npos) {
      why = "unterminated tag";
      return false;
    }
    const std::string tag = s.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) {
      why = "empty tag";
      return false;
    }
    if (tag.front() == '?') continue;
    std::size_t quotes = 0;
    for (char c : tag) quotes += c == '"';
    if (quotes % 2) {
      why = "unbalanced quotes in <" + tag + ">";
      return false;
    }
    if (tag.front() == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) {
        why = "mismatched </" + name + ">";
        return false;
      }
      stack.pop_back();
      continue;
    }
    const std::string name = tag.substr(0, tag.find_first_of(" /"));
    if (stack.empty()) ++roots;
    if (tag.back() != '/') stack.push_back(name);
  }
  if (!stack.empty()) {
    why = "unclosed <" + stack.back() + ">";
    return false;
  }
  if (roots != 1) {
    why = "expected one root element";
    return false;
  }
  return true;
}

svg::LinePlot sample_plot() {
  svg::LinePlot p{"R vs lambda <sweep> & friends", "lambda", "R", {}};
  p.series.push_back({"R", {0.1, 0.2, 0.3, 0.4}, {0.2, 0.1, NAN, 0.0}});
  p.series.push_back({"mu", {0.1, 0.2, 0.3, 0.4}, {1.0, 0.9, 0.7, 0.5}});
  return p;
}

}  // namespace

TEST(Csv, FormatRoundTripsDoubles) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-17, 0.49750000000000005}) {
    EXPECT_EQ(std::stod(csv::format(v)), v);
  }
  EXPECT_EQ(csv::format(NAN), "nan");
  EXPECT_EQ(csv::format(-INFINITY), "-inf");
}

TEST(Csv, TableRoundTrip) {
  csv::Table t({"lambda", "R", "coherent"});
  t.add_row({csv::format(0.1), csv::format(0.0123), "0"});
  t.add_row({csv::format(1.0), csv::format(NAN), "1"});
  const csv::Table back = csv::parse(t.str());
  EXPECT_EQ(back.header(), t.header());
  EXPECT_EQ(back.rows(), t.rows());
  for (const auto& r : back.rows()) EXPECT_EQ(r.size(), back.header().size());
  EXPECT_THROW(t.add_row({"1"}), InvalidInput);
  EXPECT_THROW(csv::parse("a,b\n1,2,3\n"), InvalidInput);
  EXPECT_THROW(csv::parse(""), InvalidInput);
}

TEST(Svg, WellFormedWithSingleRoot) {
  const std::string s = svg::render(sample_plot());
  std::string why;
  EXPECT_TRUE(well_formed_xml(s, why)) << why;
  EXPECT_NE(s.find("&lt;sweep&gt; &amp; friends"), std::string::npos);
  // the NaN splits the first series into two polylines
  std::size_t polylines = 0;
  for (std::size_t p = s.find("<polyline"); p != std::string::npos; p = s.find("<polyline", p + 1)) ++polylines;
  EXPECT_EQ(polylines, 3u);
}

TEST(Svg, EmptyAndFlatSeriesStillRender) {
  std::string why;
  svg::LinePlot empty{"empty", "x", "y", {}};
  EXPECT_TRUE(well_formed_xml(svg::render(empty), why)) << why;
  svg::LinePlot flat{"flat", "x", "y", {{"c", {1.0, 1.0}, {2.0, 2.0}}}};
  EXPECT_TRUE(well_formed_xml(svg::render(flat), why)) << why;
}

TEST(Svg, Deterministic) { EXPECT_EQ(svg::render(sample_plot()), svg::render(sample_plot())); }

TEST(XmlCheck, RejectsBrokenDocuments) {
  std::string why;
  EXPECT_FALSE(well_formed_xml("<svg><g></svg>", why));
  EXPECT_FALSE(well_formed_xml("<a/><b/>", why));
  EXPECT_FALSE(well_formed_xml("<a x=\"1>", why));
}
