#include "navfly/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace navfly {

namespace {

struct Panel {
    std::string title;
    std::string series;
    std::string color;
    std::vector<double> values;
    double baseline;
};

constexpr double kPanelWidth = 420;
constexpr double kPanelHeight = 260;
constexpr double kMargin = 48;

std::string num(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

// Rounds the upper axis limit to a readable step.
double axis_max(double v) {
    if (!(v > 0)) return 1.0;
    const double step = std::pow(10.0, std::floor(std::log10(v)));
    return std::ceil(v * 1.1 / step) * step;
}

void draw_panel(std::ostringstream& svg, const Panel& p, double x0) {
    const double w = kPanelWidth - 2 * kMargin;
    const double h = kPanelHeight - 2 * kMargin;
    const std::size_t n = p.values.size();
    double top = p.baseline;
    for (double v : p.values) top = std::max(top, v);
    top = axis_max(top);
    const auto px = [&](std::size_t i) {
        return x0 + kMargin + (n <= 1 ? w / 2 : w * static_cast<double>(i) / static_cast<double>(n - 1));
    };
    const auto py = [&](double v) { return kMargin + h * (1.0 - v / top); };

    svg << "<g class=\"panel\" data-series=\"" << p.series << "\">\n";
    svg << "<text x=\"" << num(x0 + kPanelWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
        << p.title << "</text>\n";
    svg << "<line x1=\"" << num(x0 + kMargin) << "\" y1=\"" << num(kMargin + h) << "\" x2=\"" << num(x0 + kMargin + w)
        << "\" y2=\"" << num(kMargin + h) << "\" stroke=\"#444\"/>\n";
    svg << "<line x1=\"" << num(x0 + kMargin) << "\" y1=\"" << num(kMargin) << "\" x2=\"" << num(x0 + kMargin)
        << "\" y2=\"" << num(kMargin + h) << "\" stroke=\"#444\"/>\n";
    for (double tick : {0.0, top / 2, top}) {
        svg << "<text x=\"" << num(x0 + kMargin - 6) << "\" y=\"" << num(py(tick) + 4)
            << "\" text-anchor=\"end\" font-size=\"10\">" << num(tick) << "</text>\n";
    }
    for (std::size_t i = 0; i < n; ++i) {
        svg << "<text x=\"" << num(px(i)) << "\" y=\"" << num(kMargin + h + 16)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << i + 1 << "</text>\n";
    }
    svg << "<text x=\"" << num(x0 + kMargin + w / 2) << "\" y=\"" << num(kPanelHeight - 8)
        << "\" text-anchor=\"middle\" font-size=\"11\">iteration</text>\n";

    svg << "<line class=\"baseline\" x1=\"" << num(x0 + kMargin) << "\" y1=\"" << num(py(p.baseline)) << "\" x2=\""
        << num(x0 + kMargin + w) << "\" y2=\"" << num(py(p.baseline))
        << "\" stroke=\"#888\" stroke-dasharray=\"5 4\"/>\n";
    svg << "<text x=\"" << num(x0 + kMargin + w) << "\" y=\"" << num(py(p.baseline) - 4)
        << "\" text-anchor=\"end\" font-size=\"10\" fill=\"#888\">baseline " << num(p.baseline) << "</text>\n";

    if (n > 1) {
        svg << "<polyline fill=\"none\" stroke=\"" << p.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < n; ++i) svg << (i ? " " : "") << num(px(i)) << ',' << num(py(p.values[i]));
        svg << "\"/>\n";
    }
    for (std::size_t i = 0; i < n; ++i) {
        svg << "<circle class=\"point\" data-series=\"" << p.series << "\" data-iteration=\"" << i + 1 << "\" cx=\""
            << num(px(i)) << "\" cy=\"" << num(py(p.values[i])) << "\" r=\"4\" fill=\"" << p.color << "\"><title>"
            << num(p.values[i]) << "</title></circle>\n";
    }
    svg << "</g>\n";
}

}  // namespace

std::string report_csv(const FlywheelRunRecord& run) {
    std::ostringstream out;
    out << kReportCsvHeader << '\n';
    out << "0,validation," << run.baseline.episodes << ',' << summary_csv_row(run.baseline) << ",,,,,iter_0/model.ckpt\n";
    for (const auto& it : run.iterations) {
        const std::string counts = std::to_string(it.deviations) + ',' + std::to_string(it.corrections_generated) +
                                   ',' + std::to_string(it.sampled_corrections) + ',' +
                                   std::to_string(it.oracle_added);
        out << it.iteration << ",train," << it.train.episodes << ',' << summary_csv_row(it.train) << ',' << counts
            << ",\n";
        out << it.iteration << ",validation," << it.validation.episodes << ',' << summary_csv_row(it.validation) << ','
            << counts << ',' << it.checkpoint << '\n';
    }
    return out.str();
}

std::string report_svg(const FlywheelRunRecord& run) {
    Panel sr{"Validation SR (%)", "sr", "#1f77b4", {}, run.baseline.sr};
    Panel ne{"Validation NE (m)", "ne", "#d62728", {}, run.baseline.ne};
    for (const auto& it : run.iterations) {
        sr.values.push_back(it.validation.sr);
        ne.values.push_back(it.validation.ne);
    }
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(2 * kPanelWidth) << "\" height=\""
        << num(kPanelHeight) << "\" viewBox=\"0 0 " << num(2 * kPanelWidth) << ' ' << num(kPanelHeight)
        << "\" font-family=\"sans-serif\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    draw_panel(svg, sr, 0);
    draw_panel(svg, ne, kPanelWidth);
    svg << "<text x=\"8\" y=\"" << num(kPanelHeight - 8) << "\" font-size=\"10\" fill=\"#444\">best iteration "
        << run.best_iteration << (run.stopped_early ? ", stopped on drop" : "") << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace navfly
