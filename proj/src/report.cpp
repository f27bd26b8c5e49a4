// SPDX-License-Identifier: Apache-2.0

#include "cfx/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cfx/common.hpp"

namespace cfx::report {

namespace fs = std::filesystem;

namespace {

std::string num(double v, const char *fmt = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string pad(const std::string &s, size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

void write_text_file(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("report: cannot write " + path);
    out << content;
    if (!out)
        throw IoError("report: short write to " + path);
}

// Places known methods in canonical order, keeps unknown labels at the end,
// and leaves gaps for methods that have no result yet.
std::vector<const eval::EvalReport *> ordered_rows(const std::vector<eval::EvalReport> &rows,
                                                   std::vector<std::string> &labels) {
    labels = method_rows();
    for (const auto &r : rows)
        if (std::find(labels.begin(), labels.end(), r.method) == labels.end())
            labels.push_back(r.method);
    std::vector<const eval::EvalReport *> out(labels.size(), nullptr);
    for (size_t i = 0; i < labels.size(); ++i)
        for (const auto &r : rows)
            if (r.method == labels[i]) {
                out[i] = &r;
                break;
            }
    return out;
}

std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("report: cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

bool parse_number(const std::string &s, double &out) {
    try {
        size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size();
    } catch (const std::exception &) {
        return false;
    }
}

std::vector<eval::EvalReport> parse_eval_csv(const std::string &path) {
    std::vector<eval::EvalReport> rows;
    const auto table = read_csv(path);
    for (size_t i = 1; i < table.size(); ++i) {
        const auto &f = table[i];
        if (f.size() != 7)
            throw IoError("report: malformed row in " + path);
        eval::EvalReport r;
        r.method = f[0];
        double flag = 0.0;
        if (!parse_number(f[1], flag))
            continue; // "n/a" placeholder row
        r.used_cycle = flag != 0.0;
        if (!parse_number(f[2], flag))
            continue;
        r.used_refine = flag != 0.0;
        if (!parse_number(f[3], r.dir_ij.linear) || !parse_number(f[4], r.dir_ij.db) ||
            !parse_number(f[5], r.dir_ji.linear) || !parse_number(f[6], r.dir_ji.db))
            continue;
        rows.push_back(std::move(r));
    }
    return rows;
}

eval::SumRateStudy parse_sumrate_csv(const std::string &path) {
    eval::SumRateStudy study;
    const auto table = read_csv(path);
    for (size_t i = 1; i < table.size(); ++i) {
        const auto &f = table[i];
        if (f.size() != 4)
            throw IoError("report: malformed row in " + path);
        eval::MethodRates pt;
        if (!parse_number(f[0], pt.snr_db) || !parse_number(f[1], pt.perfect_csi) ||
            !parse_number(f[2], pt.translator) || !parse_number(f[3], pt.linear_baseline))
            throw IoError("report: non-numeric rate in " + path);
        study.points.push_back(pt);
    }
    return study;
}

// Loss-log columns: epoch,basic_ij,basic_ji,cycle,weight,joint,lr
struct LossCurve {
    std::vector<double> epoch, joint, basic_ij, basic_ji;
};

LossCurve parse_loss_csv(const std::string &path) {
    LossCurve c;
    const auto table = read_csv(path);
    for (size_t i = 1; i < table.size(); ++i) {
        const auto &f = table[i];
        if (f.size() != 7)
            throw IoError("report: malformed row in " + path);
        double e = 0, bij = 0, bji = 0, j = 0;
        if (!parse_number(f[0], e) || !parse_number(f[1], bij) || !parse_number(f[2], bji) ||
            !parse_number(f[5], j))
            throw IoError("report: non-numeric loss in " + path);
        c.epoch.push_back(e);
        c.basic_ij.push_back(bij);
        c.basic_ji.push_back(bji);
        c.joint.push_back(j);
    }
    return c;
}

} // namespace

const std::vector<std::string> &method_rows() {
    static const std::vector<std::string> rows = {"translator", "translator_no_cycle",
                                                  "translator_no_refine", "linear_baseline",
                                                  "adversarial_gan"};
    return rows;
}

std::string format_eval_csv(const std::vector<eval::EvalReport> &rows) {
    std::vector<std::string> labels;
    const auto ordered = ordered_rows(rows, labels);
    std::string out = "method,uses_cycle,uses_refine,nmse_ij,nmse_ij_db,nmse_ji,nmse_ji_db\n";
    for (size_t i = 0; i < labels.size(); ++i) {
        out += labels[i];
        if (const auto *r = ordered[i]) {
            out += r->used_cycle ? ",1" : ",0";
            out += r->used_refine ? ",1" : ",0";
            out += "," + num(r->dir_ij.linear) + "," + num(r->dir_ij.db);
            out += "," + num(r->dir_ji.linear) + "," + num(r->dir_ji.db);
        } else {
            out += ",n/a,n/a,n/a,n/a,n/a,n/a";
        }
        out += "\n";
    }
    return out;
}

std::string format_eval_text(const std::vector<eval::EvalReport> &rows) {
    std::vector<std::string> labels;
    const auto ordered = ordered_rows(rows, labels);
    std::ostringstream out;
    out << "Extrapolation accuracy (mean NMSE over beam channels, test split)\n";
    out << pad("method", 24) << pad("cycle", 7) << pad("refine", 8) << pad("nmse i->j", 14)
        << pad("dB", 10) << pad("nmse j->i", 14) << pad("dB", 10) << "\n";
    for (size_t i = 0; i < labels.size(); ++i) {
        out << pad(labels[i], 24);
        if (const auto *r = ordered[i]) {
            out << pad(r->used_cycle ? "yes" : "no", 7) << pad(r->used_refine ? "yes" : "no", 8)
                << pad(num(r->dir_ij.linear, "%.4e"), 14) << pad(num(r->dir_ij.db, "%.2f"), 10)
                << pad(num(r->dir_ji.linear, "%.4e"), 14) << pad(num(r->dir_ji.db, "%.2f"), 10);
        } else {
            out << pad("n/a", 7) << pad("n/a", 8) << pad("n/a", 14) << pad("n/a", 10)
                << pad("n/a", 14) << pad("n/a", 10);
        }
        out << "\n";
    }
    return out.str();
}

std::string format_sumrate_csv(const eval::SumRateStudy &study) {
    std::string out = "snr_db,perfect_csi,translator,linear_baseline\n";
    for (const auto &pt : study.points)
        out += num(pt.snr_db) + "," + num(pt.perfect_csi) + "," + num(pt.translator) + "," +
               num(pt.linear_baseline) + "\n";
    return out;
}

std::string format_sumrate_text(const eval::SumRateStudy &study) {
    std::ostringstream out;
    out << "Downlink sum rate (bit/s/Hz";
    if (study.users > 0)
        out << ", " << study.users << " users, " << study.drops << " placements x " << study.draws
            << " draws";
    out << ")\n";
    out << pad("snr_db", 10) << pad("perfect_csi", 14) << pad("translator", 14)
        << pad("linear_baseline", 16) << "\n";
    for (const auto &pt : study.points)
        out << pad(num(pt.snr_db, "%.1f"), 10) << pad(num(pt.perfect_csi, "%.4f"), 14)
            << pad(num(pt.translator, "%.4f"), 14) << pad(num(pt.linear_baseline, "%.4f"), 16)
            << "\n";
    return out.str();
}

std::string render_line_plot(const std::string &title, const std::string &x_label,
                             const std::string &y_label, const std::vector<PlotSeries> &series) {
    const int width = 720, height = 480;
    const int left = 70, right = 40, top = 48, bottom = 56;
    const int plot_w = width - left - right, plot_h = height - top - bottom;
    static const char *palette[] = {"#1f6fb2", "#d1495b", "#3a913f", "#8f5aa8",
                                    "#c98a00", "#3aa6a6", "#666666"};
    const int palette_n = int(sizeof palette / sizeof palette[0]);

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto &s : series)
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
                continue;
            if (!any) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                any = true;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
    auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

    // Frame and tick grid.
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";
    const int ticks = 5;
    for (int t = 0; t <= ticks; ++t) {
        const double fx = xmin + (xmax - xmin) * t / ticks;
        const double fy = ymin + (ymax - ymin) * t / ticks;
        const double px = sx(fx), py = sy(fy);
        svg << "<line x1=\"" << px << "\" y1=\"" << top << "\" x2=\"" << px << "\" y2=\""
            << top + plot_h << "\" stroke=\"#ddd\"/>\n";
        svg << "<line x1=\"" << left << "\" y1=\"" << py << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << py << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << px << "\" y=\"" << top + plot_h + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << num(fx, "%.3g") << "</text>\n";
        svg << "<text x=\"" << left - 6 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << num(fy, "%.3g") << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
        << "</text>\n";
    svg << "<text x=\"18\" y=\"" << top + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 18 " << top + plot_h / 2 << ")\">" << y_label << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const auto &s = series[si];
        const char *color = palette[si % size_t(palette_n)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                svg << num(sx(s.x[i]), "%.2f") << "," << num(sy(s.y[i]), "%.2f") << " ";
        svg << "\"/>\n";
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                svg << "<circle cx=\"" << num(sx(s.x[i]), "%.2f") << "\" cy=\""
                    << num(sy(s.y[i]), "%.2f") << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const int ly = top + 16 + int(si) * 18;
        svg << "<line x1=\"" << left + plot_w - 150 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << left + plot_w - 126 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + plot_w - 120 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_eval_outputs(const std::string &dir, const std::vector<eval::EvalReport> &rows) {
    fs::create_directories(dir);
    write_text_file(dir + "/eval_report.csv", format_eval_csv(rows));
    write_text_file(dir + "/eval_report.txt", format_eval_text(rows));
    // dB bar data as a line plot over the method index; the CSV carries the
    // row labels.
    std::vector<PlotSeries> series(2);
    series[0].label = "i to j";
    series[1].label = "j to i";
    std::vector<std::string> labels;
    const auto ordered = ordered_rows(rows, labels);
    for (size_t i = 0; i < ordered.size(); ++i)
        if (const auto *r = ordered[i]) {
            series[0].x.push_back(double(i));
            series[0].y.push_back(r->dir_ij.db);
            series[1].x.push_back(double(i));
            series[1].y.push_back(r->dir_ji.db);
        }
    write_text_file(dir + "/nmse_plot.svg",
                    render_line_plot("Extrapolation NMSE by method (row index of eval_report.csv)",
                                     "method row", "NMSE (dB)", series));
}

void write_sumrate_outputs(const std::string &dir, const eval::SumRateStudy &study) {
    fs::create_directories(dir);
    write_text_file(dir + "/sumrate.csv", format_sumrate_csv(study));
    write_text_file(dir + "/sumrate.txt", format_sumrate_text(study));
    std::vector<PlotSeries> series(3);
    series[0].label = "perfect CSI";
    series[1].label = "translator";
    series[2].label = "linear baseline";
    for (const auto &pt : study.points) {
        series[0].x.push_back(pt.snr_db);
        series[0].y.push_back(pt.perfect_csi);
        series[1].x.push_back(pt.snr_db);
        series[1].y.push_back(pt.translator);
        series[2].x.push_back(pt.snr_db);
        series[2].y.push_back(pt.linear_baseline);
    }
    write_text_file(dir + "/sumrate_plot.svg",
                    render_line_plot("Multi-user sum rate vs SNR", "SNR (dB)",
                                     "sum rate (bit/s/Hz)", series));
}

void render_report(const std::string &runs_root, const std::string &out_dir) {
    std::vector<std::string> eval_files, rate_files, loss_files;
    std::error_code ec;
    for (fs::recursive_directory_iterator it(runs_root, ec), end; !ec && it != end;
         it.increment(ec)) {
        if (!it->is_regular_file())
            continue;
        const std::string name = it->path().filename().string();
        if (name == "eval_report.csv")
            eval_files.push_back(it->path().string());
        else if (name == "sumrate.csv")
            rate_files.push_back(it->path().string());
        else if (name == "loss_log.csv")
            loss_files.push_back(it->path().string());
    }
    std::sort(eval_files.begin(), eval_files.end());
    std::sort(rate_files.begin(), rate_files.end());
    std::sort(loss_files.begin(), loss_files.end());
    if (eval_files.empty() && rate_files.empty() && loss_files.empty())
        throw IoError("report: no runs found under '" + runs_root + "'");

    fs::create_directories(out_dir);
    std::string summary = "Report sources under " + runs_root + "\n";

    // Merge eval rows; the first file providing a method wins.
    std::vector<eval::EvalReport> merged;
    for (const auto &path : eval_files) {
        summary += "  eval: " + path + "\n";
        for (auto &r : parse_eval_csv(path)) {
            const bool seen = std::any_of(merged.begin(), merged.end(), [&](const auto &m) {
                return m.method == r.method;
            });
            if (!seen)
                merged.push_back(std::move(r));
        }
    }
    if (!eval_files.empty())
        write_eval_outputs(out_dir, merged);

    if (!rate_files.empty()) {
        eval::SumRateStudy study;
        for (const auto &path : rate_files) {
            summary += "  sumrate: " + path + "\n";
            for (auto &pt : parse_sumrate_csv(path).points) {
                const bool seen =
                    std::any_of(study.points.begin(), study.points.end(),
                                [&](const auto &p) { return p.snr_db == pt.snr_db; });
                if (!seen)
                    study.points.push_back(pt);
            }
        }
        std::sort(study.points.begin(), study.points.end(),
                  [](const auto &a, const auto &b) { return a.snr_db < b.snr_db; });
        write_sumrate_outputs(out_dir, study);
    }

    if (!loss_files.empty()) {
        std::vector<PlotSeries> series;
        for (const auto &path : loss_files) {
            summary += "  loss: " + path + "\n";
            const auto curve = parse_loss_csv(path);
            PlotSeries s;
            s.label = fs::path(path).parent_path().filename().string();
            if (s.label.empty())
                s.label = "run" + std::to_string(series.size() + 1);
            s.x = curve.epoch;
            s.y = curve.joint;
            series.push_back(std::move(s));
        }
        write_text_file(out_dir + "/loss_plot.svg",
                        render_line_plot("Joint training loss", "epoch", "loss", series));
    }

    write_text_file(out_dir + "/report_sources.txt", summary);
}

} // namespace cfx::report
