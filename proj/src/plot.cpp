#include "uwgan/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "uwgan/error.hpp"

namespace uwgan {

namespace fs = std::filesystem;

int CsvTable::column(const std::string& name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

namespace {

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    return out;
}

}  // namespace

CsvTable read_csv_table(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw RuntimeFailure("cannot read " + path.string());
    }
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) {
        throw ValidationError(path.string() + " is empty");
    }
    t.header = split_line(line);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto cells = split_line(line);
        if (cells.size() != t.header.size()) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(t.header.size()) + " columns");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            double v = std::numeric_limits<double>::quiet_NaN();
            std::from_chars(c.data(), c.data() + c.size(), v);
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

namespace {

const cv::Scalar kColors[] = {
    {180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}, {189, 103, 148}, {75, 86, 140},
};

std::string short_num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

void draw_chart(const CsvTable& t, int xcol, const std::vector<int>& cols, const std::string& title,
                const fs::path& out, int width, int height)
{
    cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    const int left = 70, right = 20, top = 40, bottom = 50;
    const cv::Rect area(left, top, width - left - right, height - top - bottom);

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double x = xcol >= 0 ? t.rows[r][static_cast<std::size_t>(xcol)] : static_cast<double>(r);
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        for (int c : cols) {
            const double y = t.rows[r][static_cast<std::size_t>(c)];
            if (std::isfinite(y)) {
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
    }
    if (!std::isfinite(ymin)) {
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax <= xmin) {
        xmax = xmin + 1.0;
    }
    if (ymax <= ymin) {
        ymax = ymin + 1.0;
    }
    auto px = [&](double x) { return area.x + static_cast<int>((x - xmin) / (xmax - xmin) * area.width); };
    auto py = [&](double y) { return area.y + area.height - static_cast<int>((y - ymin) / (ymax - ymin) * area.height); };

    cv::rectangle(img, area, cv::Scalar(0, 0, 0), 1);
    for (int i = 1; i < 5; ++i) {
        const int gy = area.y + area.height * i / 5;
        cv::line(img, {area.x, gy}, {area.x + area.width, gy}, cv::Scalar(225, 225, 225), 1);
    }
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    cv::putText(img, title, {left, 25}, font, 0.6, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, short_num(ymax), {5, area.y + 10}, font, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, short_num(ymin), {5, area.y + area.height}, font, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, short_num(xmin), {area.x, height - 28}, font, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, short_num(xmax), {area.x + area.width - 40, height - 28}, font, 0.4, cv::Scalar(0, 0, 0), 1,
                cv::LINE_AA);
    cv::putText(img, xcol >= 0 ? t.header[static_cast<std::size_t>(xcol)] : "row",
                {area.x + area.width / 2 - 15, height - 10}, font, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);

    for (std::size_t k = 0; k < cols.size(); ++k) {
        const cv::Scalar color = kColors[k % std::size(kColors)];
        std::vector<cv::Point> pts;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double y = t.rows[r][static_cast<std::size_t>(cols[k])];
            if (!std::isfinite(y)) {
                continue;
            }
            const double x = xcol >= 0 ? t.rows[r][static_cast<std::size_t>(xcol)] : static_cast<double>(r);
            pts.emplace_back(px(x), py(y));
        }
        if (pts.size() >= 2) {
            cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
        } else if (pts.size() == 1) {
            cv::circle(img, pts[0], 3, color, cv::FILLED);
        }
        const int ly = area.y + 18 + 18 * static_cast<int>(k);
        cv::line(img, {area.x + area.width - 170, ly - 4}, {area.x + area.width - 145, ly - 4}, color, 2);
        cv::putText(img, t.header[static_cast<std::size_t>(cols[k])], {area.x + area.width - 140, ly}, font, 0.45,
                    cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    fs::create_directories(out.parent_path());
    if (!cv::imwrite(out.string(), img)) {
        throw RuntimeFailure("cannot write " + out.string());
    }
}

}  // namespace

std::vector<fs::path> plot_csv_curves(const CsvTable& t, const fs::path& out_dir, const std::string& stem, int width,
                                      int height)
{
    int xcol = t.column("step");
    if (xcol < 0) {
        xcol = t.column("epoch");
    }
    // the loss log has many terms; keep the headline ones if present
    std::vector<int> acc, rest;
    const bool gan_log = t.column("cycle_total") >= 0;
    for (int c = 0; c < static_cast<int>(t.header.size()); ++c) {
        const std::string& h = t.header[static_cast<std::size_t>(c)];
        if (c == xcol || h == "epoch" || h == "step" || h == "lambda") {
            continue;
        }
        if (gan_log && h != "gan_total" && h != "cycle_total" && h != "total") {
            continue;
        }
        (h.find("accuracy") != std::string::npos ? acc : rest).push_back(c);
    }
    std::vector<fs::path> written;
    if (!rest.empty()) {
        const fs::path p = out_dir / (stem + "_loss.png");
        draw_chart(t, xcol, rest, stem + ": loss", p, width, height);
        written.push_back(p);
    }
    if (!acc.empty()) {
        const fs::path p = out_dir / (stem + "_accuracy.png");
        draw_chart(t, xcol, acc, stem + ": accuracy", p, width, height);
        written.push_back(p);
    }
    return written;
}

}  // namespace uwgan
