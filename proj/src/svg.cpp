#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "plume/export.hpp"

namespace plume::exports {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s(buf);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string label_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// Nine-stop sequential palette, pale yellow to dark red.
constexpr std::array<std::array<int, 3>, 9> kPalette{{{255, 255, 204},
                                                      {255, 237, 160},
                                                      {254, 217, 118},
                                                      {254, 178, 76},
                                                      {253, 141, 60},
                                                      {252, 78, 42},
                                                      {227, 26, 28},
                                                      {189, 0, 38},
                                                      {128, 0, 38}}};
constexpr int kBands = 10;

std::string rgb(std::array<int, 3> c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

std::string band_color(int band) {
    const double f = static_cast<double>(band) / (kBands - 1) * (kPalette.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(f), kPalette.size() - 2);
    const double w = f - static_cast<double>(i);
    std::array<int, 3> c{};
    for (int k = 0; k < 3; ++k) {
        c[k] = static_cast<int>(std::lround(kPalette[i][k] * (1.0 - w) + kPalette[i + 1][k] * w));
    }
    return rgb(c);
}

// Log-spaced bands when the scale is strictly positive, linear otherwise.
int band_of(double v, const ColorScale& s) {
    double f;
    if (s.min > 0.0 && s.max > s.min) {
        f = (std::log(v) - std::log(s.min)) / (std::log(s.max) - std::log(s.min));
    } else if (s.max > s.min) {
        f = (v - s.min) / (s.max - s.min);
    } else {
        f = 0.5;
    }
    return std::clamp(static_cast<int>(f * kBands), 0, kBands - 1);
}

std::string header(int w, int h) {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
           std::to_string(h) + "\" font-family=\"sans-serif\">\n";
}

std::string_view class_color(ind::CellClass c) {
    using ind::CellClass;
    switch (c) {
    case CellClass::StrongUp: return "#d7191c";
    case CellClass::Up: return "#fdae61";
    case CellClass::Stable: return "#ffffff";
    case CellClass::Down: return "#a6d96a";
    case CellClass::StrongDown: return "#1a9641";
    case CellClass::Above: return "#d7191c";
    case CellClass::Below: return "#1a9641";
    case CellClass::NonDetect: return "#2c7bb6";
    case CellClass::Insufficient: return "#bdbdbd";
    }
    return "#bdbdbd";
}

} // namespace

std::string render_svg(const SliceGrid& g, std::span<const Polyline> overlays, const SvgOptions& opt) {
    const int W = opt.width, H = opt.height;
    const double margin = 40.0, legend = 90.0;
    const double x0 = g.xs.front(), x1 = g.xs.back(), y0 = g.ys.front(), y1 = g.ys.back();
    const double scale = std::min((W - 2 * margin - legend) / (x1 - x0), (H - 2 * margin) / (y1 - y0));
    auto sx = [&](double x) { return margin + (x - x0) * scale; };
    auto sy = [&](double y) { return H - margin - (y - y0) * scale; };

    ColorScale cs;
    if (opt.scale) {
        cs = *opt.scale;
    } else if (auto r = g.range()) {
        cs = {r->first, r->second};
    }

    std::ostringstream o;
    o << header(W, H);
    o << "<title>" << escape(g.solute) << " " << escape(g.label) << "</title>\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"#ffffff\"/>\n";

    // Banded fill: each lattice cell takes the band of its corner mean; runs
    // of equal band along a row are merged into one rectangle.
    o << "<g class=\"fill\" stroke=\"none\">\n";
    const int nx = g.nx, ny = g.ny;
    auto at = [&](int i, int j) { return static_cast<std::size_t>(j) * nx + i; };
    for (int j = 0; j + 1 < ny; ++j) {
        int run_start = -1, run_band = -1;
        auto flush = [&](int end) {
            if (run_start < 0) return;
            const double xa = sx(g.xs[run_start]), xb = sx(g.xs[end]);
            const double ya = sy(g.ys[j + 1]), yb = sy(g.ys[j]);
            o << "<rect x=\"" << num(xa) << "\" y=\"" << num(ya) << "\" width=\"" << num(xb - xa) << "\" height=\""
              << num(yb - ya) << "\" fill=\"" << band_color(run_band) << "\"/>\n";
            run_start = -1;
        };
        for (int i = 0; i + 1 < nx; ++i) {
            const std::array<std::size_t, 4> c{at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)};
            bool ok = true;
            double mean = 0.0;
            for (auto k : c) {
                ok = ok && !g.mask[k] && std::isfinite(g.values[k]);
                mean += g.values[k] / 4.0;
            }
            if (!ok) {
                flush(i);
                continue;
            }
            const int band = band_of(mean, cs);
            if (run_start >= 0 && band != run_band) flush(i);
            if (run_start < 0) {
                run_start = i;
                run_band = band;
            }
        }
        flush(nx - 1);
    }
    o << "</g>\n";

    o << "<g class=\"overlays\" fill=\"none\" stroke=\"#9ecae1\" stroke-width=\"1.5\">\n";
    for (const auto& pl : overlays) {
        if (pl.points.size() < 2) continue;
        o << "<polyline points=\"";
        for (std::size_t i = 0; i < pl.points.size(); ++i) {
            o << (i ? " " : "") << num(sx(pl.points[i][0])) << "," << num(sy(pl.points[i][1]));
        }
        o << "\"/>\n";
    }
    o << "</g>\n";

    double rmax = 0.0;
    for (const auto& v : g.flow.vectors) rmax = std::max(rmax, v.R);
    if (!g.flow.vectors.empty() && rmax > 0.0) {
        const double len = 0.08 * std::min(W - 2 * margin - legend, H - 2 * margin);
        o << "<g class=\"flow\" stroke=\"#3182bd\" fill=\"#3182bd\" stroke-width=\"1.5\">\n";
        for (const auto& v : g.flow.vectors) {
            const WellMark* w = nullptr;
            for (const auto& m : g.wells)
                if (m.well_id == v.well_id) w = &m;
            if (!w) continue;
            const double th = v.theta * std::acos(-1.0) / 180.0;
            const double l = len * v.R / rmax;
            const double ax = sx(w->x), ay = sy(w->y);
            const double bx = ax + l * std::cos(th), by = ay - l * std::sin(th);
            const double hx = 6.0 * std::cos(th), hy = -6.0 * std::sin(th);
            o << "<g class=\"arrow\" data-well=\"" << escape(v.well_id) << "\"><line x1=\"" << num(ax) << "\" y1=\""
              << num(ay) << "\" x2=\"" << num(bx) << "\" y2=\"" << num(by) << "\"/><polygon points=\"" << num(bx) << ","
              << num(by) << " " << num(bx - hx - 0.5 * hy) << "," << num(by - hy + 0.5 * hx) << " "
              << num(bx - hx + 0.5 * hy) << "," << num(by - hy - 0.5 * hx) << "\"/></g>\n";
        }
        o << "</g>\n";
    }

    // Latest non-synthetic sample per well: detects in red, non-detects in black.
    std::map<std::string, const SampleMark*> latest;
    for (const auto& s : g.samples) {
        if (s.synthetic) continue;
        auto& slot = latest[s.well_id];
        if (!slot || s.date >= slot->date) slot = &s;
    }
    std::map<std::string, bool> napl;
    for (const auto& n : g.napl)
        if (n.thickness > 0.0) napl[n.well_id] = true;

    o << "<g class=\"wells\" font-size=\"10\">\n";
    for (const auto& w : g.wells) {
        const double cx = sx(w.x), cy = sy(w.y);
        o << "<g class=\"well\" data-well=\"" << escape(w.well_id) << "\"><circle cx=\"" << num(cx) << "\" cy=\"" << num(cy)
          << "\" r=\"3\" fill=\"#000000\"/>";
        o << "<text class=\"well-id\" x=\"" << num(cx + 5) << "\" y=\"" << num(cy - 5) << "\" fill=\"#404040\">"
          << escape(w.well_id) << "</text>";
        std::string text;
        bool red = false;
        if (napl.count(w.well_id)) {
            text = "NAPL";
            red = true;
        } else if (auto it = latest.find(w.well_id); it != latest.end()) {
            const auto* s = it->second;
            text = s->censored ? "ND<" + label_value(s->raw) : label_value(s->raw);
            red = !s->censored;
        }
        if (!text.empty()) {
            o << "<text class=\"" << (red ? "detect" : "nondetect") << "\" x=\"" << num(cx + 5) << "\" y=\"" << num(cy + 9)
              << "\" fill=\"" << (red ? "#e31a1c" : "#000000") << "\">" << escape(text) << "</text>";
        }
        o << "</g>\n";
    }
    o << "</g>\n";

    const double lx = W - legend + 10, ly = margin, lh = (H - 2 * margin) / kBands;
    o << "<g class=\"legend\" font-size=\"9\">\n";
    for (int b = 0; b < kBands; ++b) {
        const double y = ly + (kBands - 1 - b) * lh;
        o << "<rect x=\"" << num(lx) << "\" y=\"" << num(y) << "\" width=\"14\" height=\"" << num(lh) << "\" fill=\""
          << band_color(b) << "\"/>\n";
    }
    o << "<text x=\"" << num(lx + 18) << "\" y=\"" << num(ly + 8) << "\">" << label_value(cs.max) << "</text>\n";
    o << "<text x=\"" << num(lx + 18) << "\" y=\"" << num(ly + kBands * lh) << "\">" << label_value(cs.min) << "</text>\n";
    o << "<text x=\"" << num(lx) << "\" y=\"" << num(ly - 8) << "\">" << escape(g.units) << "</text>\n";
    o << "</g>\n";
    o << "<text class=\"caption\" x=\"" << num(margin) << "\" y=\"20\" font-size=\"13\">" << escape(g.solute) << " "
      << escape(g.label) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::string render_svg(const SoluteSeries& s, const SvgOptions& opt) {
    const int W = opt.width, H = opt.height;
    const double margin = 50.0;
    const auto* fit = s.fit;
    const bool log_axis = !fit || fit->scale == trend::Scale::Log;

    double tmin = INFINITY, tmax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
    auto take = [&](double t, double v) {
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
        if (std::isfinite(v) && (!log_axis || v > 0.0)) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    };
    for (const auto& o : s.observations) take(o.days, o.working);
    if (fit) {
        for (std::size_t i = 0; i < fit->eval_times.size(); ++i) {
            take(fit->eval_times[i], fit->lower(i));
            take(fit->eval_times[i], fit->upper(i));
        }
    }
    if (!(tmax > tmin)) {
        tmin -= 1.0;
        tmax += 1.0;
    }
    if (!(vmax >= vmin)) {
        vmin = 1.0;
        vmax = 10.0;
    }
    if (!(vmax > vmin)) {
        vmin = log_axis ? vmin / 2 : vmin - 1;
        vmax = log_axis ? vmax * 2 : vmax + 1;
    }
    auto tv = [&](double v) { return log_axis ? std::log(std::max(v, vmin)) : v; };
    const double a = tv(vmin), b = tv(vmax);
    auto sx = [&](double t) { return margin + (t - tmin) / (tmax - tmin) * (W - 2 * margin); };
    auto sy = [&](double v) { return H - margin - (tv(v) - a) / (b - a) * (H - 2 * margin); };

    std::ostringstream o;
    o << header(W, H);
    o << "<title>" << escape(s.solute) << "</title>\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"#ffffff\"/>\n";
    o << "<g class=\"axes\" stroke=\"#000000\"><line x1=\"" << num(margin) << "\" y1=\"" << num(H - margin) << "\" x2=\""
      << num(W - margin) << "\" y2=\"" << num(H - margin) << "\"/><line x1=\"" << num(margin) << "\" y1=\""
      << num(margin) << "\" x2=\"" << num(margin) << "\" y2=\"" << num(H - margin) << "\"/></g>\n";
    o << "<g class=\"ticks\" font-size=\"9\">";
    o << "<text x=\"" << num(margin) << "\" y=\"" << num(H - margin + 14) << "\">"
      << Date(static_cast<int>(std::floor(tmin))).iso() << "</text>";
    o << "<text x=\"" << num(W - margin - 50) << "\" y=\"" << num(H - margin + 14) << "\">"
      << Date(static_cast<int>(std::floor(tmax))).iso() << "</text>";
    o << "<text x=\"4\" y=\"" << num(H - margin) << "\">" << label_value(vmin) << "</text>";
    o << "<text x=\"4\" y=\"" << num(margin + 4) << "\">" << label_value(vmax) << "</text>";
    o << "</g>\n";

    if (fit && !fit->eval_times.empty()) {
        o << "<polygon class=\"band\" fill=\"#c6dbef\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < fit->eval_times.size(); ++i) {
            o << (i ? " " : "") << num(sx(fit->eval_times[i])) << "," << num(sy(fit->upper(i)));
        }
        for (std::size_t i = fit->eval_times.size(); i-- > 0;) {
            o << " " << num(sx(fit->eval_times[i])) << "," << num(sy(fit->lower(i)));
        }
        o << "\"/>\n";
        o << "<polyline class=\"smoother\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < fit->eval_times.size(); ++i) {
            o << (i ? " " : "") << num(sx(fit->eval_times[i])) << "," << num(sy(fit->level(i)));
        }
        o << "\"/>\n";
    }
    o << "<g class=\"observations\">\n";
    for (const auto& ob : s.observations) {
        if (log_axis && !(ob.working > 0.0)) continue;
        if (ob.censored) {
            o << "<circle class=\"nondetect\" cx=\"" << num(sx(ob.days)) << "\" cy=\"" << num(sy(ob.working))
              << "\" r=\"3\" fill=\"none\" stroke=\"#000000\"/>\n";
        } else {
            o << "<circle class=\"detect\" cx=\"" << num(sx(ob.days)) << "\" cy=\"" << num(sy(ob.working))
              << "\" r=\"3\" fill=\"#e31a1c\"/>\n";
        }
    }
    o << "</g>\n";
    o << "<text class=\"caption\" x=\"" << num(margin) << "\" y=\"20\" font-size=\"13\">" << escape(s.solute) << " ("
      << escape(s.units) << ")</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::string render_svg(const ind::IndicatorMatrix& m, const SvgOptions& opt) {
    const double left = 80.0, top = 60.0;
    const std::size_t rows = m.wells.size(), cols = m.solutes.size();
    const double cw = cols ? std::min(90.0, (opt.width - left - 10.0) / cols) : 90.0;
    const double ch = rows ? std::min(24.0, (opt.height - top - 10.0) / rows) : 24.0;
    const int W = std::max(opt.width, static_cast<int>(left + cw * cols + 10));
    const int H = std::max(opt.height, static_cast<int>(top + ch * rows + 10));

    std::ostringstream o;
    o << header(W, H);
    o << "<title>" << escape(ind::to_string(m.mode)) << "</title>\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"#ffffff\"/>\n";
    o << "<g class=\"cols\" font-size=\"10\">\n";
    for (std::size_t c = 0; c < cols; ++c) {
        o << "<text x=\"" << num(left + cw * (c + 0.5)) << "\" y=\"" << num(top - 8)
          << "\" text-anchor=\"middle\">" << escape(m.solutes[c]) << "</text>\n";
    }
    o << "</g>\n<g class=\"rows\" font-size=\"10\">\n";
    for (std::size_t r = 0; r < rows; ++r) {
        o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(top + ch * (r + 0.5) + 3) << "\" text-anchor=\"end\">"
          << escape(m.wells[r]) << "</text>\n";
    }
    o << "</g>\n<g class=\"cells\" stroke=\"#808080\" stroke-width=\"0.5\">\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto& cell = m.at(r, c);
            o << "<rect class=\"cell " << ind::to_string(cell.cls) << "\" x=\"" << num(left + cw * c) << "\" y=\""
              << num(top + ch * r) << "\" width=\"" << num(cw) << "\" height=\"" << num(ch) << "\" fill=\""
              << class_color(cell.cls) << "\"/>\n";
        }
    }
    o << "</g>\n";
    o << "<text class=\"caption\" x=\"10\" y=\"20\" font-size=\"13\">" << escape(ind::to_string(m.mode)) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

} // namespace plume::exports
