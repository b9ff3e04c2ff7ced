#pragma once

// Static convergence-curve rendering for aggregate traces. Included by
// harness.hpp; not meant to be used standalone.

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcbo {

inline void write_convergence_svg(const std::string& path,
                                  const std::vector<AggregateRow>& rows) {
  // Only finite medians are drawable; infinite prefixes (no feasible point
  // yet) are clipped.
  std::vector<AggregateRow> finite;
  for (const auto& r : rows)
    if (std::isfinite(r.median)) finite.push_back(r);

  const double W = 720, H = 440, ML = 70, MR = 20, MT = 20, MB = 50;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";

  if (finite.size() >= 2) {
    double xmin = finite.front().eval, xmax = finite.back().eval;
    double ymin = finite.front().median, ymax = ymin;
    for (const auto& r : finite) {
      for (double v : {r.median, r.q25, r.q75}) {
        if (!std::isfinite(v)) continue;
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    }
    if (ymax == ymin) ymax = ymin + 1.0;
    auto px = [&](double e) { return ML + (e - xmin) / (xmax - xmin) * (W - ML - MR); };
    auto py = [&](double v) { return H - MB - (v - ymin) / (ymax - ymin) * (H - MT - MB); };

    // interquartile band
    out << "<path fill='#c6dbef' stroke='none' d='M";
    for (const auto& r : finite)
      out << px(r.eval) << ' ' << py(std::isfinite(r.q25) ? r.q25 : ymax) << " L";
    for (auto it = finite.rbegin(); it != finite.rend(); ++it)
      out << px(it->eval) << ' ' << py(std::isfinite(it->q75) ? it->q75 : ymax) << " L";
    out.seekp(-1, std::ios_base::cur);
    out << "Z'/>\n";

    out << "<polyline fill='none' stroke='#08519c' stroke-width='1.5' points='";
    for (const auto& r : finite) out << px(r.eval) << ',' << py(r.median) << ' ';
    out << "'/>\n";

    out << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    out << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    out << "<text x='" << (W / 2) << "' y='" << H - 12
        << "' font-size='13' text-anchor='middle'>evaluations</text>\n";
    out << "<text x='" << ML << "' y='" << MT - 5 << "' font-size='11'>" << ymax << "</text>\n";
    out << "<text x='" << ML << "' y='" << H - MB + 14 << "' font-size='11'>" << ymin
        << "</text>\n";
    out << "<text x='" << ML + 4 << "' y='" << MT + 12
        << "' font-size='13'>best feasible objective (median, IQR)</text>\n";
  } else {
    out << "<text x='20' y='40' font-size='14'>no feasible points to plot</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace lcbo
