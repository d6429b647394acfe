#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace tamperlab {

// Minimal SVG writer for signal and report renderings.
class SvgDoc {
public:
    SvgDoc(int width, int height) : w_(width), h_(height) {
        body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
              << "\" viewBox=\"0 0 " << w_ << ' ' << h_ << "\">\n";
        body_ << "<rect width=\"" << w_ << "\" height=\"" << h_ << "\" fill=\"white\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                  double stroke_width = 1.0) {
        if (pts.size() < 2) return;
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << stroke_width
              << "\" points=\"";
        for (const auto& [x, y] : pts) body_ << fmt(x) << ',' << fmt(y) << ' ';
        body_ << "\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill, double opacity = 1.0) {
        body_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
              << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity
              << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, int size = 12) {
        body_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-family=\"monospace\" font-size=\""
              << size << "\">" << s << "</text>\n";
    }

    std::string str() const { return body_.str() + "</svg>\n"; }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << str();
    }

private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return buf;
    }

    int w_, h_;
    std::ostringstream body_;
};

} // namespace tamperlab
