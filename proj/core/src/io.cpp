#include "evdeblur/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <system_error>

namespace evdeblur {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& msg) {
    throw std::runtime_error(path.string() + ": " + msg);
}

[[noreturn]] void fail_line(const std::filesystem::path& path, size_t line,
                            const std::string& msg) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + msg);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open for reading");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(path, "read failed");
    return data;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& data) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(path, "cannot open for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) fail(path, "write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        fail(path, "rename failed: " + ec.message());
    }
}

void append_double(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void append_long(std::string& out, long long v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

// Whitespace-separated token scanner over text file contents, tracking line
// numbers for error messages.
class TokenReader {
public:
    TokenReader(const std::filesystem::path& path, const std::string& data)
        : path_(path), data_(data) {}

    size_t line() const { return line_; }

    bool at_end() {
        skip_space();
        return pos_ >= data_.size();
    }

    double next_double(const char* what) {
        std::string_view tok = next_token(what);
        double v = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            fail_line(path_, line_, std::string("malformed ") + what);
        return v;
    }

    long long next_long(const char* what) {
        std::string_view tok = next_token(what);
        long long v = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            fail_line(path_, line_, std::string("malformed ") + what);
        return v;
    }

    std::string_view next_token(const char* what) {
        skip_space();
        if (pos_ >= data_.size())
            fail_line(path_, line_, std::string("missing ") + what);
        size_t start = pos_;
        while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_])))
            ++pos_;
        return std::string_view(data_).substr(start, pos_ - start);
    }

private:
    void skip_space() {
        while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) {
            if (data_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    const std::filesystem::path& path_;
    const std::string& data_;
    size_t pos_ = 0;
    size_t line_ = 1;
};

void put_u32_le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32_le(std::string& out, float f) {
    uint32_t bits = 0;
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32_le(out, bits);
}

class ByteReader {
public:
    ByteReader(const std::filesystem::path& path, const std::string& data)
        : path_(path), data_(data) {}

    uint32_t u32_le() {
        need(4);
        uint32_t v = static_cast<uint8_t>(data_[pos_]) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(data_[pos_ + 1])) << 8) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(data_[pos_ + 2])) << 16) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(data_[pos_ + 3])) << 24);
        pos_ += 4;
        return v;
    }

    float f32_le() {
        uint32_t bits = u32_le();
        float f = 0.0f;
        std::memcpy(&f, &bits, sizeof(f));
        return f;
    }

    void expect_magic(const char* magic) {
        need(4);
        if (std::memcmp(data_.data() + pos_, magic, 4) != 0)
            fail(path_, std::string("bad magic, expected ") + magic);
        pos_ += 4;
    }

    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(size_t n) {
        if (pos_ + n > data_.size()) fail(path_, "truncated payload");
    }

    const std::filesystem::path& path_;
    const std::string& data_;
    size_t pos_ = 0;
};

void check_dims(const std::filesystem::path& path, uint32_t w, uint32_t h) {
    // 1<<14 per side caps the payload near a gigabyte, which is far beyond
    // any sensor this handles; larger values are virtually always corruption.
    if (w == 0 || h == 0 || w > (1u << 14) || h > (1u << 14))
        fail(path, "implausible dimensions " + std::to_string(w) + "x" + std::to_string(h));
}

}  // namespace

EventStream read_events(const std::filesystem::path& path) {
    std::string data = read_file(path);
    TokenReader tok(path, data);

    if (tok.next_token("header magic") != "EVT1") fail_line(path, 1, "bad magic, expected EVT1");
    EventStream s;
    s.width = static_cast<int>(tok.next_long("width"));
    s.height = static_cast<int>(tok.next_long("height"));
    s.t_begin = tok.next_double("t_begin");
    s.t_end = tok.next_double("t_end");
    long long count = tok.next_long("event count");
    if (s.width <= 0 || s.height <= 0) fail_line(path, 1, "sensor size must be positive");
    if (!(s.t_end >= s.t_begin)) fail_line(path, 1, "exposure interval is reversed");
    if (count < 0) fail_line(path, 1, "negative event count");

    s.events.reserve(static_cast<size_t>(count));
    double prev = s.t_begin;
    for (long long i = 0; i < count; ++i) {
        Event e;
        e.t = tok.next_double("timestamp");
        size_t line = tok.line();
        e.x = static_cast<int>(tok.next_long("x"));
        e.y = static_cast<int>(tok.next_long("y"));
        e.p = static_cast<int>(tok.next_long("polarity"));
        if (e.x < 0 || e.x >= s.width || e.y < 0 || e.y >= s.height)
            fail_line(path, line, "event coordinates out of range");
        if (e.p != -1 && e.p != 1) fail_line(path, line, "polarity must be -1 or 1");
        if (!(e.t >= prev)) fail_line(path, line, "timestamps not sorted");
        if (e.t > s.t_end) fail_line(path, line, "timestamp past exposure end");
        prev = e.t;
        s.events.push_back(e);
    }
    if (!tok.at_end()) fail_line(path, tok.line(), "trailing data after declared event count");
    return s;
}

void write_events(const std::filesystem::path& path, const EventStream& stream) {
    validate_stream(stream, "write_events(" + path.string() + ")");
    std::string out;
    out.reserve(32 + stream.events.size() * 24);
    out += "EVT1 ";
    append_long(out, stream.width);
    out += ' ';
    append_long(out, stream.height);
    out += ' ';
    append_double(out, stream.t_begin);
    out += ' ';
    append_double(out, stream.t_end);
    out += ' ';
    append_long(out, static_cast<long long>(stream.events.size()));
    out += '\n';
    for (const Event& e : stream.events) {
        append_double(out, e.t);
        out += ' ';
        append_long(out, e.x);
        out += ' ';
        append_long(out, e.y);
        out += ' ';
        append_long(out, e.p);
        out += '\n';
    }
    write_file_atomic(path, out);
}

namespace {

Image read_imf1(const std::filesystem::path& path, const std::string& data) {
    ByteReader r(path, data);
    r.expect_magic("IMF1");
    uint32_t w = r.u32_le();
    uint32_t h = r.u32_le();
    check_dims(path, w, h);
    Image img(static_cast<int>(h), static_cast<int>(w));
    for (size_t i = 0; i < img.size(); ++i) img[i] = r.f32_le();
    if (!r.at_end()) fail(path, "trailing bytes after pixel data");
    return img;
}

Image read_pgm(const std::filesystem::path& path, const std::string& data) {
    // Header tokens may be separated by whitespace and '#' comments.
    size_t pos = 0;
    auto next_header_token = [&]() -> std::string {
        while (pos < data.size()) {
            char ch = data[pos];
            if (ch == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos;
            } else {
                break;
            }
        }
        size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos])) &&
               data[pos] != '#')
            ++pos;
        if (start == pos) fail(path, "truncated header");
        return data.substr(start, pos - start);
    };
    auto header_int = [&](const char* what) -> long {
        std::string tok = next_header_token();
        long v = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            fail(path, std::string("malformed ") + what);
        return v;
    };

    std::string magic = next_header_token();
    bool binary = magic == "P5";
    if (!binary && magic != "P2") fail(path, "bad magic, expected P5 or P2");
    long w = header_int("width");
    long h = header_int("height");
    long maxval = header_int("maxval");
    check_dims(path, static_cast<uint32_t>(w > 0 ? w : 0), static_cast<uint32_t>(h > 0 ? h : 0));
    if (maxval < 1 || maxval > 255) fail(path, "maxval must be in 1..255");

    Image img(static_cast<int>(h), static_cast<int>(w));
    if (binary) {
        // Exactly one whitespace byte separates the header from the pixels.
        if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
            fail(path, "missing pixel data separator");
        ++pos;
        if (data.size() - pos < img.size()) fail(path, "truncated payload");
        for (size_t i = 0; i < img.size(); ++i)
            img[i] = static_cast<uint8_t>(data[pos + i]) / static_cast<double>(maxval);
    } else {
        for (size_t i = 0; i < img.size(); ++i) {
            long v = header_int("pixel");
            if (v < 0 || v > maxval) fail(path, "pixel value out of range");
            img[i] = v / static_cast<double>(maxval);
        }
    }
    return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
    std::string data = read_file(path);
    if (data.size() >= 4 && data.compare(0, 4, "IMF1") == 0) return read_imf1(path, data);
    if (data.size() >= 2 && (data.compare(0, 2, "P5") == 0 || data.compare(0, 2, "P2") == 0))
        return read_pgm(path, data);
    fail(path, "unrecognized image format");
}

void write_image(const std::filesystem::path& path, const Image& img) {
    if (img.empty()) fail(path, "refusing to write an empty image");
    std::string out;
    if (path.extension() == ".pgm") {
        out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
              "\n255\n";
        out.reserve(out.size() + img.size());
        for (size_t i = 0; i < img.size(); ++i) {
            double v = std::clamp(img[i], 0.0, 1.0);
            out.push_back(static_cast<char>(static_cast<uint8_t>(std::lround(v * 255.0))));
        }
    } else {
        out.reserve(12 + img.size() * 4);
        out += "IMF1";
        put_u32_le(out, static_cast<uint32_t>(img.width()));
        put_u32_le(out, static_cast<uint32_t>(img.height()));
        for (size_t i = 0; i < img.size(); ++i)
            put_f32_le(out, static_cast<float>(img[i]));
    }
    write_file_atomic(path, out);
}

FlowField read_flow(const std::filesystem::path& path) {
    std::string data = read_file(path);
    ByteReader r(path, data);
    r.expect_magic("FLO1");
    uint32_t w = r.u32_le();
    uint32_t h = r.u32_le();
    check_dims(path, w, h);
    FlowField f(static_cast<int>(h), static_cast<int>(w));
    for (size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = r.f32_le();
        f.v[i] = r.f32_le();
    }
    if (!r.at_end()) fail(path, "trailing bytes after flow data");
    return f;
}

void write_flow(const std::filesystem::path& path, const FlowField& flow) {
    if (flow.u.empty()) fail(path, "refusing to write an empty flow");
    require_same_size(flow.u, flow.v, "write_flow(" + path.string() + ")");
    std::string out;
    out.reserve(12 + flow.u.size() * 8);
    out += "FLO1";
    put_u32_le(out, static_cast<uint32_t>(flow.width()));
    put_u32_le(out, static_cast<uint32_t>(flow.height()));
    for (size_t i = 0; i < flow.u.size(); ++i) {
        put_f32_le(out, static_cast<float>(flow.u[i]));
        put_f32_le(out, static_cast<float>(flow.v[i]));
    }
    write_file_atomic(path, out);
}

DefParams read_def(const std::filesystem::path& path) {
    std::string data = read_file(path);
    TokenReader tok(path, data);
    if (tok.next_token("header magic") != "DEF1") fail_line(path, 1, "bad magic, expected DEF1");
    long long w = tok.next_long("width");
    long long h = tok.next_long("height");
    long long k = tok.next_long("k");
    double lambda = tok.next_double("lambda");
    double sigma = tok.next_double("sigma");
    long long L = tok.next_long("L");
    check_dims(path, static_cast<uint32_t>(w > 0 ? w : 0),
               static_cast<uint32_t>(h > 0 ? h : 0));
    if (k < 1 || k > 16) fail_line(path, 1, "k must be in 1..16");

    DefParams p;
    p.k = static_cast<int>(k);
    p.lambda = lambda;
    p.sigma = sigma;
    p.L = static_cast<int>(L);
    p.c = Image(static_cast<int>(h), static_cast<int>(w));
    for (size_t i = 0; i < p.c.size(); ++i) p.c[i] = tok.next_double("center value");
    p.alpha.assign(static_cast<size_t>(p.plane_count()),
                   Image(static_cast<int>(h), static_cast<int>(w)));
    for (Image& plane : p.alpha)
        for (size_t i = 0; i < plane.size(); ++i) plane[i] = tok.next_double("coefficient");
    if (!tok.at_end()) fail_line(path, tok.line(), "trailing data after coefficient planes");

    // Exactly-written files pass the strict simplex check untouched; small
    // drift from hand-edited files is renormalized, anything worse is an
    // error.
    for (size_t i = 0; i < p.c.size(); ++i) {
        double sum = 0.0;
        for (const Image& plane : p.alpha) {
            if (!(plane[i] >= 0.0)) fail(path, "negative coefficient");
            sum += plane[i];
        }
        if (std::abs(sum - 1.0) > 1e-6) fail(path, "coefficients do not sum to 1");
        if (std::abs(sum - 1.0) > 1e-9)
            for (Image& plane : p.alpha) plane[i] /= sum;
    }
    validate_def_params(p, "read_def(" + path.string() + ")");
    return p;
}

void write_def(const std::filesystem::path& path, const DefParams& params) {
    validate_def_params(params, "write_def(" + path.string() + ")");
    std::string out;
    out += "DEF1 ";
    append_long(out, params.c.width());
    out += ' ';
    append_long(out, params.c.height());
    out += ' ';
    append_long(out, params.k);
    out += ' ';
    append_double(out, params.lambda);
    out += ' ';
    append_double(out, params.sigma);
    out += ' ';
    append_long(out, params.L);
    out += '\n';
    auto append_plane = [&out](const Image& img) {
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                if (x) out += ' ';
                append_double(out, img.at(y, x));
            }
            out += '\n';
        }
    };
    append_plane(params.c);
    for (const Image& plane : params.alpha) append_plane(plane);
    write_file_atomic(path, out);
}

}  // namespace evdeblur
