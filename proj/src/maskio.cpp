#include "tgc/maskio.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>

#include "tgc/error.hpp"

namespace tgc {

namespace {

void check_dims(int width, int height) {
    if (width < 1 || height < 1 || width > kMaxMapDim || height > kMaxMapDim) {
        throw ValidationError("map dimensions " + std::to_string(width) + "x" + std::to_string(height) +
                              " outside [1, " + std::to_string(kMaxMapDim) + "]");
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Tokenizer over a PGM header / P2 body, tracking line numbers and skipping '#' comments.
class PgmCursor {
public:
    PgmCursor(const std::string& bytes, const std::string& name) : bytes_(bytes), name_(name) {}

    long next_int(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        long value = 0;
        auto [ptr, ec] = std::from_chars(bytes_.data() + start, bytes_.data() + pos_, value);
        if (start == pos_ || ec != std::errc()) {
            fail(std::string("expected ") + what);
        }
        return value;
    }

    // Consumes exactly one whitespace byte after maxval (start of P5 raster).
    void single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            fail("expected whitespace after maxval");
        }
        if (bytes_[pos_] == '\n') ++line_;
        ++pos_;
    }

    std::string_view magic() {
        if (bytes_.size() < 2) fail("truncated magic number");
        pos_ = 2;
        return std::string_view(bytes_).substr(0, 2);
    }

    std::size_t pos() const { return pos_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw FormatError(name_ + ": " + msg + " (line " + std::to_string(line_) + ", offset " + std::to_string(pos_) +
                          ")");
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                if (c == '\n') ++line_;
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& bytes_;
    std::string name_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

ProbMap parse_pgm(const std::string& bytes, const std::string& name, MapFormat expected) {
    PgmCursor cur(bytes, name);
    const auto magic = cur.magic();
    const bool binary = magic == "P5";
    if (!binary && magic != "P2") cur.fail("not a P2/P5 PGM file");
    if ((expected == MapFormat::pgm_binary) != binary) {
        cur.fail(std::string("expected ") + (binary ? "P2" : "P5") + " but found " + std::string(magic));
    }
    const long width = cur.next_int("width");
    const long height = cur.next_int("height");
    const long maxval = cur.next_int("maxval");
    if (width < 1 || height < 1 || width > kMaxMapDim || height > kMaxMapDim) cur.fail("dimensions out of range");
    if (maxval <= 0 || maxval > 65535) cur.fail("maxval must be in [1, 65535]");

    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<double> values(count);
    const double scale = 1.0 / static_cast<double>(maxval);

    if (!binary) {
        for (std::size_t i = 0; i < count; ++i) {
            const long v = cur.next_int("pixel value");
            if (v > maxval) cur.fail("pixel value exceeds maxval");
            values[i] = static_cast<double>(v) * scale;
        }
    } else {
        cur.single_whitespace();
        const std::size_t bpp = maxval > 255 ? 2 : 1;
        const std::size_t start = cur.pos();
        if (bytes.size() < start + count * bpp) {
            throw FormatError(name + ": truncated P5 raster (offset " + std::to_string(bytes.size()) + ", need " +
                              std::to_string(start + count * bpp) + " bytes)");
        }
        for (std::size_t i = 0; i < count; ++i) {
            long v = static_cast<unsigned char>(bytes[start + i * bpp]);
            if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(bytes[start + i * bpp + 1]);
            if (v > maxval) {
                throw FormatError(name + ": pixel value exceeds maxval (offset " + std::to_string(start + i * bpp) +
                                  ")");
            }
            values[i] = static_cast<double>(v) * scale;
        }
    }
    return ProbMap(static_cast<int>(width), static_cast<int>(height), std::move(values));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

ProbMap parse_csv(const std::string& text, const std::string& name) {
    std::vector<double> values;
    int width = -1;
    int height = 0;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = trim(line);
        if (row.empty()) continue;
        int cols = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = row.find(',', start);
            const auto cell = trim(row.substr(start, comma == std::string_view::npos ? row.npos : comma - start));
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw FormatError(name + ": bad number '" + std::string(cell) + "' (line " + std::to_string(line_no) +
                                  ", column " + std::to_string(cols + 1) + ")");
            }
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError(name + ": value " + std::string(cell) + " outside [0,1] (line " +
                                      std::to_string(line_no) + ", column " + std::to_string(cols + 1) + ")");
            }
            values.push_back(v);
            ++cols;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (width < 0) {
            width = cols;
        } else if (cols != width) {
            throw FormatError(name + ": row has " + std::to_string(cols) + " columns, expected " +
                              std::to_string(width) + " (line " + std::to_string(line_no) + ")");
        }
        ++height;
        if (height > kMaxMapDim || width > kMaxMapDim) throw FormatError(name + ": grid exceeds size limit");
    }
    if (height == 0) throw FormatError(name + ": empty CSV grid (line " + std::to_string(line_no) + ")");
    return ProbMap(width, height, std::move(values));
}

void write_pgm_bytes(const std::filesystem::path& path, int width, int height, const std::vector<int>& pixels,
                     MapFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    if (format == MapFormat::pgm_binary) {
        out << "P5\n" << width << ' ' << height << "\n255\n";
        std::string raster(pixels.size(), '\0');
        std::transform(pixels.begin(), pixels.end(), raster.begin(), [](int v) { return static_cast<char>(v); });
        out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    } else if (format == MapFormat::pgm_ascii) {
        out << "P2\n" << width << ' ' << height << "\n255\n";
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                out << pixels[static_cast<std::size_t>(y) * width + x] << (x + 1 < width ? " " : "\n");
            }
        }
    } else {
        throw ValidationError("save_pgm: CSV is not a PGM format");
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

ProbMap::ProbMap(int width, int height, double fill) : width_(width), height_(height) {
    check_dims(width, height);
    if (!(fill >= 0.0 && fill <= 1.0)) throw ValidationError("probability fill outside [0,1]");
    values_.assign(static_cast<std::size_t>(width) * height, fill);
}

ProbMap::ProbMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    check_dims(width, height);
    if (values_.size() != static_cast<std::size_t>(width) * height) {
        throw ShapeError("probability grid has " + std::to_string(values_.size()) + " values, expected " +
                         std::to_string(static_cast<std::size_t>(width) * height));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) {
            throw ValidationError("probability at index " + std::to_string(i) + " outside [0,1]");
        }
    }
}

LabelMask::LabelMask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
    check_dims(width, height);
    if (fill > 1) throw ValidationError("label fill must be 0 or 1");
    labels_.assign(static_cast<std::size_t>(width) * height, fill);
}

LabelMask::LabelMask(int width, int height, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
    check_dims(width, height);
    if (labels_.size() != static_cast<std::size_t>(width) * height) throw ShapeError("label grid size mismatch");
    if (std::any_of(labels_.begin(), labels_.end(), [](std::uint8_t v) { return v > 1; })) {
        throw ValidationError("labels must be 0 or 1");
    }
}

std::size_t LabelMask::foreground_count() const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
}

ProbMap LabelMask::to_prob_map() const {
    std::vector<double> v(labels_.begin(), labels_.end());
    return ProbMap(width_, height_, std::move(v));
}

ProbMap load_map(const std::filesystem::path& path, MapFormat format) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    const std::string bytes = read_file(path);
    if (format == MapFormat::csv_grid) return parse_csv(bytes, path.string());
    return parse_pgm(bytes, path.string(), format);
}

ProbMap load_map(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    const std::string bytes = read_file(path);
    if (bytes.starts_with("P2")) return parse_pgm(bytes, path.string(), MapFormat::pgm_ascii);
    if (bytes.starts_with("P5")) return parse_pgm(bytes, path.string(), MapFormat::pgm_binary);
    return parse_csv(bytes, path.string());
}

void save_pgm(const std::filesystem::path& path, const ProbMap& map, MapFormat format) {
    std::vector<int> px(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) px[i] = static_cast<int>(std::lround(map[i] * 255.0));
    write_pgm_bytes(path, map.width(), map.height(), px, format);
}

void save_pgm(const std::filesystem::path& path, const LabelMask& mask, MapFormat format) {
    std::vector<int> px(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) px[i] = mask[i] ? 255 : 0;
    write_pgm_bytes(path, mask.width(), mask.height(), px, format);
}

LabelMask threshold(const ProbMap& p, double t) {
    if (!(t > 0.0 && t < 1.0)) throw ValidationError("threshold must lie in (0,1)");
    std::vector<std::uint8_t> labels(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) labels[i] = p[i] > t ? 1 : 0;
    return LabelMask(p.width(), p.height(), std::move(labels));
}

namespace {

struct UnionFind {
    std::vector<int> parent;

    int make() {
        parent.push_back(static_cast<int>(parent.size()));
        return parent.back();
    }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // Keep the smaller provisional label as root.
        if (b < a) std::swap(a, b);
        parent[b] = a;
    }
};

}  // namespace

// Two-pass raster labeling with union-find over provisional labels.
RegionSet connected_components(const LabelMask& mask, Connectivity connectivity, std::size_t min_area) {
    if (min_area < 1) throw ValidationError("min_area must be >= 1");
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> provisional(mask.size(), -1);
    UnionFind uf;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = mask.index(x, y);
            if (!mask[i]) continue;
            int label = -1;
            auto visit = [&](int nx, int ny) {
                if (nx < 0 || nx >= w || ny < 0) return;
                const int other = provisional[mask.index(nx, ny)];
                if (other < 0) return;
                if (label < 0) {
                    label = other;
                } else {
                    uf.unite(label, other);
                }
            };
            visit(x - 1, y);
            visit(x, y - 1);
            if (connectivity == Connectivity::eight) {
                visit(x - 1, y - 1);
                visit(x + 1, y - 1);
            }
            provisional[i] = label < 0 ? uf.make() : label;
        }
    }

    // Root label -> output slot, in order of first raster appearance.
    std::vector<int> slot(uf.parent.size(), -1);
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < provisional.size(); ++i) {
        if (provisional[i] < 0) continue;
        const int root = uf.find(provisional[i]);
        if (slot[root] < 0) {
            slot[root] = static_cast<int>(members.size());
            members.emplace_back();
        }
        members[slot[root]].push_back(i);
    }

    RegionSet out;
    out.width = w;
    out.height = h;
    for (auto& pixels : members) {
        if (pixels.size() < min_area) continue;
        Region r;
        r.id = static_cast<int>(out.regions.size());
        double sx = 0.0;
        double sy = 0.0;
        for (const std::size_t i : pixels) {
            sx += static_cast<double>(i % w);
            sy += static_cast<double>(i / w);
        }
        r.hard_centroid = {sx / pixels.size(), sy / pixels.size()};
        r.pixels = std::move(pixels);
        out.regions.push_back(std::move(r));
    }
    return out;
}

double region_mass(const Region& region, const ProbMap& p) {
    double mass = 0.0;
    for (const std::size_t i : region.pixels) mass += p[i];
    return mass;
}

std::vector<Point> centroids(const RegionSet& rs, const ProbMap& p, CentroidMode mode) {
    std::vector<Point> out;
    out.reserve(rs.size());
    if (mode == CentroidMode::hard) {
        for (const auto& r : rs.regions) out.push_back(r.hard_centroid);
        return out;
    }
    if (p.width() != rs.width || p.height() != rs.height) {
        throw ShapeError("probability map dimensions do not match region set");
    }
    const int w = rs.width;
    for (const auto& r : rs.regions) {
        double mass = 0.0;
        double sx = 0.0;
        double sy = 0.0;
        for (const std::size_t i : r.pixels) {
            const double v = p[i];
            mass += v;
            sx += v * static_cast<double>(i % w);
            sy += v * static_cast<double>(i / w);
        }
        if (!(mass > 0.0)) throw DegenerateError("region " + std::to_string(r.id) + " has zero probability mass");
        out.push_back({sx / mass, sy / mass});
    }
    return out;
}

Overlap dice_jaccard(const LabelMask& pred, const LabelMask& ref) {
    if (pred.width() != ref.width() || pred.height() != ref.height()) {
        throw ShapeError("dice_jaccard: mask dimensions differ");
    }
    std::size_t inter = 0;
    std::size_t np = 0;
    std::size_t nr = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        np += pred[i];
        nr += ref[i];
        inter += pred[i] & ref[i];
    }
    const std::size_t uni = np + nr - inter;
    if (uni == 0) return {1.0, 1.0};
    return {2.0 * static_cast<double>(inter) / static_cast<double>(np + nr),
            static_cast<double>(inter) / static_cast<double>(uni)};
}

}  // namespace tgc
