// Checkpoint container (all integers little-endian):
//
//   magic        8 bytes  "SCDMCKPT"
//   version      u32      1
//   text_length  u32      followed by key=value lines (config + metadata)
//   tensor_count u32
//   per tensor:  u32 name length, name bytes, u32 ndim, u32 dims[ndim],
//                float32 values[prod(dims)]
//
// Network parameters come first in construction order, followed by the
// training histories "meta.loss_history" and "meta.val_history".

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "surfcdm/denoiser.hpp"
#include "surfcdm/image_io.hpp"

namespace surfcdm {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'D', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

void put_floats(std::string& out, const float* data, std::size_t n) {
    out.append(reinterpret_cast<const char*>(data), n * sizeof(float));
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void floats(float* dst, std::size_t n, const char* what) {
        need(n * sizeof(float), what);
        std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) throw Error(ErrorKind::FormatError, std::string("truncated checkpoint reading ") + what);
    }
    std::string bytes_;
    std::size_t pos_ = 0;
};

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
    return s;
}

std::string config_text(const DenoiserModel& model) {
    const auto& c = model.config();
    std::ostringstream os;
    os << "input_channels=" << c.input_channels << "\n"
       << "output_channels=" << c.output_channels << "\n"
       << "levels=" << c.levels << "\n"
       << "channels=" << join(c.channels) << "\n"
       << "num_columns=" << c.num_columns << "\n"
       << "column_length=" << c.column_length << "\n"
       << "padded_length=" << c.padded_length << "\n"
       << "epoch=" << model.metadata().epoch << "\n";
    return os.str();
}

int to_int(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::FormatError, "checkpoint config missing field '" + key + "'");
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw Error(ErrorKind::FormatError, "checkpoint field '" + key + "' is not an integer");
    }
}

}  // namespace

void save_checkpoint(const DenoiserModel& model, const std::filesystem::path& path) {
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    const std::string text = config_text(model);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;

    const auto& params = model.network().params();
    put_u32(out, static_cast<std::uint32_t>(params.size() + 2));
    for (const auto& p : params) {
        put_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
        for (int d : p.shape) put_u32(out, static_cast<std::uint32_t>(d));
        put_floats(out, p.value.data(), p.value.size());
    }
    auto put_history = [&](const std::string& name, const std::vector<double>& values) {
        std::vector<float> f(values.begin(), values.end());
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, 1);
        put_u32(out, static_cast<std::uint32_t>(f.size()));
        put_floats(out, f.data(), f.size());
    };
    put_history("meta.loss_history", model.metadata().loss_history);
    put_history("meta.val_history", model.metadata().val_history);
    write_text_atomic(path, out);
}

DenoiserModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open checkpoint " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    Reader r(buffer.str());

    if (r.str(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
        throw Error(ErrorKind::FormatError, "bad magic in " + path.string());
    }
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw Error(ErrorKind::FormatError, "unsupported checkpoint version " + std::to_string(version) +
                                                " (expected " + std::to_string(kVersion) + ")");
    }
    const std::string text = r.str(r.u32("config length"), "config");
    std::map<std::string, std::string> kv;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::FormatError, "malformed config line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    DenoiserConfig cfg;
    cfg.input_channels = to_int(kv, "input_channels");
    cfg.output_channels = to_int(kv, "output_channels");
    cfg.levels = to_int(kv, "levels");
    cfg.num_columns = to_int(kv, "num_columns");
    cfg.column_length = to_int(kv, "column_length");
    cfg.padded_length = to_int(kv, "padded_length");
    cfg.channels.clear();
    {
        std::istringstream cs(kv.count("channels") ? kv.at("channels") : "");
        for (std::string tok; std::getline(cs, tok, ',');) cfg.channels.push_back(std::stoi(tok));
    }
    DenoiserModel model;
    try {
        model = DenoiserModel(cfg);
    } catch (const Error& e) {
        throw Error(ErrorKind::FormatError, std::string("invalid stored config: ") + e.what());
    }
    model.metadata().epoch = to_int(kv, "epoch");

    auto& params = model.network().params();
    const std::uint32_t count = r.u32("tensor count");
    if (count != params.size() + 2) {
        throw Error(ErrorKind::FormatError, "tensor count " + std::to_string(count) + " does not match config");
    }
    for (auto& p : params) {
        const std::string name = r.str(r.u32("name length"), "tensor name");
        if (name != p.name) throw Error(ErrorKind::FormatError, "expected tensor '" + p.name + "', found '" + name + "'");
        const std::uint32_t ndim = r.u32("ndim");
        std::vector<int> shape;
        for (std::uint32_t k = 0; k < ndim; ++k) shape.push_back(static_cast<int>(r.u32("dims")));
        if (shape != p.shape) throw Error(ErrorKind::FormatError, "shape mismatch for tensor '" + name + "'");
        r.floats(p.value.data(), p.value.size(), name.c_str());
    }
    auto read_history = [&](const std::string& expected, std::vector<double>& dst) {
        const std::string name = r.str(r.u32("name length"), "tensor name");
        if (name != expected) throw Error(ErrorKind::FormatError, "expected tensor '" + expected + "'");
        if (r.u32("ndim") != 1) throw Error(ErrorKind::FormatError, "history must be one-dimensional");
        std::vector<float> f(r.u32("dims"));
        r.floats(f.data(), f.size(), name.c_str());
        dst.assign(f.begin(), f.end());
    };
    read_history("meta.loss_history", model.metadata().loss_history);
    read_history("meta.val_history", model.metadata().val_history);
    if (!r.done()) throw Error(ErrorKind::FormatError, "trailing bytes after last tensor");
    return model;
}

DenoiserModel load_checkpoint(const std::filesystem::path& path, const DenoiserConfig& expected) {
    DenoiserModel model = load_checkpoint(path);
    const auto& c = model.config();
    auto check = [](bool same, const char* field) {
        if (!same) throw Error(ErrorKind::FormatError, std::string("config mismatch in field '") + field + "'");
    };
    check(c.input_channels == expected.input_channels, "input_channels");
    check(c.output_channels == expected.output_channels, "output_channels");
    check(c.levels == expected.levels, "levels");
    check(c.channels == expected.channels, "channels");
    check(c.num_columns == expected.num_columns, "num_columns");
    check(c.column_length == expected.column_length, "column_length");
    check(c.padded_length == expected.padded_length, "padded_length");
    return model;
}

}  // namespace surfcdm
