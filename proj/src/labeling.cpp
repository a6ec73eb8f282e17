#include "qgcl/labeling.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "qgcl/error.hpp"
#include "text_util.hpp"

namespace qgcl {

namespace {

void check_finite(std::span<const double> v, const char* who) {
    if (v.empty()) throw DomainError(std::string(who) + ": empty PSNR sequence");
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw DomainError(std::string(who) + ": PSNR of frame " + std::to_string(i) + " is not finite");
}

template <class Better>
std::vector<int> local_extrema(std::span<const double> v, Better better) {
    const std::size_t n = v.size();
    std::vector<int> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const bool left = i == 0 || better(v[i], v[i - 1]);
        const bool right = i + 1 == n || better(v[i], v[i + 1]);
        out[i] = left && right ? 1 : 0;
    }
    return out;
}

}  // namespace

PqfLabels detect_pqf(std::span<const double> psnr) {
    check_finite(psnr, "detect_pqf");
    PqfLabels r;
    r.labels = local_extrema(psnr, [](double a, double b) { return a > b; });
    for (int l : r.labels) (l ? r.positive_count : r.negative_count)++;
    return r;
}

std::vector<int> detect_valleys(std::span<const double> psnr) {
    check_finite(psnr, "detect_valleys");
    return local_extrema(psnr, [](double a, double b) { return a < b; });
}

ClassWeight class_weight(std::span<const int> labels) {
    std::size_t pos = 0, neg = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw DomainError("class_weight: label " + std::to_string(l) + " is not 0 or 1");
        (l ? pos : neg)++;
    }
    if (pos == 0)
        throw DomainError("class_weight: no peak-quality frames among " + std::to_string(labels.size()) +
                          " labels; widen the training set");
    return {static_cast<double>(neg) / static_cast<double>(pos), neg == 0};
}

std::vector<double> frame_psnr(const LumaSequence& raw, const LumaSequence& compressed) {
    if (raw.width != compressed.width || raw.height != compressed.height ||
        raw.frame_count() != compressed.frame_count())
        throw ShapeError("raw and compressed sequences differ in shape or length");
    std::vector<double> out;
    out.reserve(raw.frame_count());
    for (std::size_t n = 0; n < raw.frame_count(); ++n) {
        const Psnr p = psnr(compressed.frame(n), raw.frame(n));
        if (p.is_infinite())
            throw DomainError("frame " + std::to_string(n) +
                              " is identical in raw and compressed input (infinite PSNR); cannot label");
        out.push_back(p.db());
    }
    return out;
}

void write_label_csv(const std::filesystem::path& path, std::span<const double> psnr, const PqfLabels& labels) {
    if (psnr.size() != labels.labels.size()) throw ShapeError("PSNR and label counts differ");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write label CSV " + path.string());
    out << "frame_index,psnr,label\n";
    char buf[32];
    for (std::size_t i = 0; i < psnr.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", psnr[i]);
        out << i << ',' << buf << ',' << labels.labels[i] << '\n';
    }
    if (!out) throw FormatError("write failed for " + path.string());
}

LabelRows read_label_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read label CSV " + path.string());
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "frame_index,psnr,label")
        throw FormatError(path.string() + ": header must be 'frame_index,psnr,label'");
    LabelRows rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        const auto cells = detail::split_csv(line);
        if (cells.size() != 3) throw FormatError(where + ": expected 3 columns");
        if (detail::parse_int(cells[0], where) != static_cast<long long>(rows.psnr.size()))
            throw FormatError(where + ": frame_index out of sequence");
        rows.psnr.push_back(detail::parse_double(cells[1], where));
        const long long l = detail::parse_int(cells[2], where);
        if (l != 0 && l != 1) throw FormatError(where + ": label must be 0 or 1");
        rows.labels.push_back(static_cast<int>(l));
    }
    return rows;
}

}  // namespace qgcl
