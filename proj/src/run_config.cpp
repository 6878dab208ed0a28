#include "surfcdm/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace surfcdm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw Error(ErrorKind::InvalidConfig, "invalid value '" + value + "' for key '" + key + "'");
}

int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) bad_value(key, v);
        return d;
    } catch (const std::logic_error&) {
        bad_value(key, v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream in(v);
    for (std::string tok; std::getline(in, tok, ',');) out.push_back(parse_int(key, trim(tok)));
    if (out.empty()) bad_value(key, v);
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define INT_FIELD(member) \
    Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_int(k, v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }}
#define U64_FIELD(member) \
    Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_u64(k, v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }}
#define DOUBLE_FIELD(member) \
    Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }, \
          [](const RunConfig& c) { return fmt(c.member); }}
#define BOOL_FIELD(member) \
    Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); }, \
          [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define STRING_FIELD(member) \
    Field{[](RunConfig& c, const std::string&, const std::string& v) { c.member = v; }, \
          [](const RunConfig& c) { return c.member; }}

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"seed", U64_FIELD(seed)},
        {"data.n_samples", INT_FIELD(data_n_samples)},
        {"data.frames_per_group", INT_FIELD(data_frames_per_group)},
        {"data.width", INT_FIELD(data_width)},
        {"data.height", INT_FIELD(data_height)},
        {"data.dropout_probability", DOUBLE_FIELD(data_dropout_probability)},
        {"grid.num_columns", INT_FIELD(grid_num_columns)},
        {"grid.column_length", INT_FIELD(grid_column_length)},
        {"schedule.sigma_min", DOUBLE_FIELD(schedule_sigma_min)},
        {"schedule.sigma_max", DOUBLE_FIELD(schedule_sigma_max)},
        {"schedule.steps", INT_FIELD(schedule_steps)},
        {"perturbation.max_vertical_fraction", DOUBLE_FIELD(perturbation.max_vertical_fraction)},
        {"perturbation.max_rotation_fraction", DOUBLE_FIELD(perturbation.max_rotation_fraction)},
        {"perturbation.band_low", DOUBLE_FIELD(perturbation.band_low)},
        {"perturbation.band_high", DOUBLE_FIELD(perturbation.band_high)},
        {"denoiser.levels", INT_FIELD(denoiser_levels)},
        {"denoiser.channels",
         Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.denoiser_channels = parse_int_list(k, v); },
               [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.denoiser_channels.size(); ++i) {
                       s += (i ? "," : "") + std::to_string(c.denoiser_channels[i]);
                   }
                   return s;
               }}},
        {"denoiser.padded_length", INT_FIELD(denoiser_padded_length)},
        {"denoiser.init_seed", U64_FIELD(denoiser_init_seed)},
        {"train.learning_rate", DOUBLE_FIELD(train_learning_rate)},
        {"train.batch_size", INT_FIELD(train_batch_size)},
        {"train.epochs", INT_FIELD(train_epochs)},
        {"train.lambda_mode", STRING_FIELD(train_lambda_mode)},
        {"train.augment", BOOL_FIELD(train_augment)},
        {"train.max_samples", INT_FIELD(train_max_samples)},
        {"sampler.initial_radius", DOUBLE_FIELD(sampler_initial_radius)},
        {"sampler.threshold", DOUBLE_FIELD(sampler_threshold)},
        {"sampler.centroid", STRING_FIELD(sampler_centroid)},
        {"sampler.runs", INT_FIELD(sampler_runs)},
    };
    return table;
}

const Field& lookup(const std::string& key) {
    for (const auto& [name, field] : fields())
        if (name == key) return field;
    throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { lookup(key).set(*this, key, trim(value)); }

std::string RunConfig::get(const std::string& key) const { return lookup(key).get(*this); }

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& [name, field] : fields()) out.push_back(name);
    return out;
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read config file " + path.string());
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [name, field] : fields()) out += name + " = " + field.get(*this) + "\n";
    return out;
}

void RunConfig::validate() const {
    schedule();
    denoiser().validate();
    perturbation.validate();
    training().validate();
    sampler().validate();
    if (train_lambda_mode != "uniform" && train_lambda_mode != "inverse_magnitude") {
        throw Error(ErrorKind::InvalidConfig, "train.lambda_mode must be uniform or inverse_magnitude");
    }
    if (sampler_centroid != "oracle" && sampler_centroid != "estimated") {
        throw Error(ErrorKind::InvalidConfig, "sampler.centroid must be oracle or estimated");
    }
    if (sampler_runs < 2) throw Error(ErrorKind::InvalidConfig, "sampler.runs must be >= 2");
    if (train_max_samples < 0) throw Error(ErrorKind::InvalidConfig, "train.max_samples must be >= 0");
    if (data_width < 16 || data_height < 16) throw Error(ErrorKind::InvalidConfig, "data size must be >= 16");
    if (data_n_samples < 10) throw Error(ErrorKind::InvalidConfig, "data.n_samples must be >= 10");
    if (data_frames_per_group < 1) throw Error(ErrorKind::InvalidConfig, "data.frames_per_group must be >= 1");
}

NoiseSchedule RunConfig::schedule() const {
    try {
        return make_schedule(schedule_sigma_min, schedule_sigma_max, schedule_steps);
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidConfig, e.what());
    }
}

DenoiserConfig RunConfig::denoiser() const {
    DenoiserConfig c;
    c.levels = denoiser_levels;
    c.channels = denoiser_channels;
    c.num_columns = grid_num_columns;
    c.column_length = grid_column_length;
    c.padded_length = denoiser_padded_length;
    return c;
}

TrainingConfig RunConfig::training() const {
    TrainingConfig t;
    t.learning_rate = train_learning_rate;
    t.batch_size = train_batch_size;
    t.epochs = train_epochs;
    t.lambda_mode = train_lambda_mode == "inverse_magnitude" ? LambdaMode::InverseMagnitude : LambdaMode::Uniform;
    t.seed = seed;
    t.augment = train_augment;
    return t;
}

SamplerConfig RunConfig::sampler() const {
    SamplerConfig s;
    s.schedule = schedule();
    s.perturbation = perturbation;
    s.num_columns = grid_num_columns;
    s.column_length = grid_column_length;
    s.initial_radius = sampler_initial_radius;
    s.threshold = sampler_threshold;
    s.centroid_mode = sampler_centroid == "estimated" ? CentroidMode::Estimated : CentroidMode::Oracle;
    return s;
}

DatasetOptions RunConfig::dataset() const {
    DatasetOptions d;
    d.n_samples = data_n_samples;
    d.frames_per_group = data_frames_per_group;
    d.width = data_width;
    d.height = data_height;
    d.seed = seed;
    d.dropout_probability = data_dropout_probability;
    return d;
}

}  // namespace surfcdm
