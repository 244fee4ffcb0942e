#include "destrack/pipeline/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "destrack/common/error.hpp"

namespace destrack::pipeline {

namespace {

constexpr double kW = 480, kH = 360, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

void save(const std::string& body, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << body;
}

std::string header(const std::string& title) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title) << "</text>\n";
    return os.str();
}

}  // namespace

void write_pr_svg(const std::vector<NamedCurve>& curves, const std::string& title, const std::filesystem::path& path) {
    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    auto sx = [&](double r) { return kLeft + r * pw; };
    auto sy = [&](double p) { return kTop + (1.0 - p) * ph; };
    std::ostringstream os;
    os << header(title);
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = k / 4.0;
        os << "<text x=\"" << num(sx(v)) << "\" y=\"" << num(kTop + ph + 15) << "\" text-anchor=\"middle\">" << num(v)
           << "</text>\n";
        os << "<text x=\"" << num(kLeft - 5) << "\" y=\"" << num(sy(v) + 4) << "\" text-anchor=\"end\">" << num(v)
           << "</text>\n";
    }
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kH - 12) << "\" text-anchor=\"middle\">Recall</text>\n";
    os << "<text x=\"15\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
       << num(kTop + ph / 2) << ")\">Precision</text>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = kColors[i % std::size(kColors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        if (curves[i].curve)
            for (const auto& p : curves[i].curve->points) os << num(sx(p.recall)) << "," << num(sy(p.precision)) << " ";
        os << "\"/>\n";
        const double ly = kTop + 15 + 15.0 * i;
        os << "<line x1=\"" << num(kLeft + pw - 150) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw - 130)
           << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(kLeft + pw - 125) << "\" y=\"" << num(ly + 4) << "\">" << escape(curves[i].label);
        if (curves[i].curve) os << " (AP " << num(curves[i].curve->average_precision) << ")";
        os << "</text>\n";
    }
    os << "</svg>\n";
    save(os.str(), path);
}

void write_event_study_svg(const event_study::RegressionResult& result, const std::string& title,
                           const std::filesystem::path& path) {
    using namespace event_study;
    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    double lo = 0, hi = 0;
    for (double c : result.coefficients) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    const double pad = std::max(0.05, (hi - lo) * 0.1);
    lo -= pad;
    hi += pad;
    auto sx = [&](int bin) { return kLeft + (bin - kReferenceBin) * pw / (kMaxLag - kReferenceBin); };
    auto sy = [&](double v) { return kTop + (hi - v) / (hi - lo) * ph; };
    std::ostringstream os;
    os << header(title);
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << num(sy(0))
       << "\" stroke=\"gray\"/>\n";
    os << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << kTop << "\" x2=\"" << num(sx(0)) << "\" y2=\"" << kTop + ph
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        os << "<text x=\"" << num(kLeft - 5) << "\" y=\"" << num(sy(v) + 4) << "\" text-anchor=\"end\">" << num(v)
           << "</text>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << kColors[0] << "\" stroke-width=\"1.5\" points=\"";
    for (int b = kReferenceBin; b <= kMaxLag; ++b) os << num(sx(b)) << "," << num(sy(result.at(b))) << " ";
    os << "\"/>\n";
    for (int b = kReferenceBin; b <= kMaxLag; ++b) {
        os << "<circle cx=\"" << num(sx(b)) << "\" cy=\"" << num(sy(result.at(b))) << "\" r=\"3\" fill=\"" << kColors[0]
           << "\"/>\n";
        os << "<text x=\"" << num(sx(b)) << "\" y=\"" << num(kTop + ph + 15) << "\" text-anchor=\"middle\">"
           << (b == kReferenceBin ? std::string("ref") : std::to_string(b)) << "</text>\n";
    }
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kH - 12)
       << "\" text-anchor=\"middle\">Image periods relative to event</text>\n";
    os << "</svg>\n";
    save(os.str(), path);
}

}  // namespace destrack::pipeline
