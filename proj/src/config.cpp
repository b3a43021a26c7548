#include "fieldpipe/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "fieldpipe/error.hpp"

namespace fieldpipe {

namespace {

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<std::string, double, bool, Array> data;
    int line = 0;
    bool integral = false;
};

using Table = std::map<std::string, Value>;
using Document = std::map<std::string, Table>;  // "" is the root table

[[noreturn]] void fail(int line, const std::string& msg) {
    throw Error(ErrorKind::Config, "config line " + std::to_string(line) + ": " + msg);
}

class Parser {
public:
    Parser(const std::string& text, int line) : s_(text), line_(line) {}

    Value parse_value() {
        skip_ws();
        if (pos_ >= s_.size()) fail(line_, "missing value");
        const char c = s_[pos_];
        if (c == '"') return {parse_string(), line_};
        if (c == '[') return parse_array();
        if (s_.compare(pos_, 4, "true") == 0) {
            pos_ += 4;
            return {true, line_};
        }
        if (s_.compare(pos_, 5, "false") == 0) {
            pos_ += 5;
            return {false, line_};
        }
        return parse_number();
    }

    void expect_end() {
        skip_ws();
        if (pos_ != s_.size()) fail(line_, "unexpected text '" + s_.substr(pos_) + "'");
    }

    std::string parse_string() {
        ++pos_;  // opening quote
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\' && pos_ < s_.size()) {
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '\\': c = '\\'; break;
                    case '"': c = '"'; break;
                    default: fail(line_, std::string("unsupported escape \\") + e);
                }
            }
            out += c;
        }
        if (pos_ >= s_.size()) fail(line_, "unterminated string");
        ++pos_;
        return out;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    Value parse_array() {
        ++pos_;
        Array items;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return {items, line_};
        }
        while (true) {
            items.push_back(parse_value());
            skip_ws();
            if (pos_ >= s_.size()) fail(line_, "unterminated array");
            if (s_[pos_] == ',') {
                ++pos_;
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ']') {
                    ++pos_;
                    break;
                }
                continue;
            }
            if (s_[pos_] == ']') {
                ++pos_;
                break;
            }
            fail(line_, "expected ',' or ']' in array");
        }
        return {items, line_};
    }

    Value parse_number() {
        std::size_t end = pos_;
        while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) ||
                                   s_[end] == '.' || s_[end] == '-' || s_[end] == '+' || s_[end] == '_')) {
            ++end;
        }
        std::string token = s_.substr(pos_, end - pos_);
        std::erase(token, '_');
        char* stop = nullptr;
        const double v = std::strtod(token.c_str(), &stop);
        if (token.empty() || *stop != '\0') fail(line_, "invalid value '" + token + "'");
        pos_ = end;
        Value out{v, line_};
        out.integral = token.find_first_of(".eE") == std::string::npos;
        return out;
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    int line_;
};

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int bracket_balance(const std::string& s) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
        if (in_string) continue;
        depth += s[i] == '[';
        depth -= s[i] == ']';
    }
    return depth;
}

Document parse_document(const std::string& text) {
    Document doc;
    doc[""];
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) fail(line_no, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (doc.count(section) && section != "") fail(line_no, "duplicate section [" + section + "]");
            doc[section];
            continue;
        }
        const int start_line = line_no;
        // Arrays may continue over several lines.
        while (bracket_balance(line) > 0 && std::getline(in, raw)) {
            ++line_no;
            line += " " + trim(strip_comment(raw));
        }
        std::string key;
        std::size_t eq = 0;
        if (line.front() == '"') {
            Parser p(line, start_line);
            key = p.parse_string();
            eq = line.find('=', line.find('"', 1) + 1);
        } else {
            eq = line.find('=');
            key = trim(line.substr(0, eq == std::string::npos ? 0 : eq));
        }
        if (eq == std::string::npos || key.empty()) fail(start_line, "expected key = value");
        const std::string rest = line.substr(eq + 1);
        Parser p(rest, start_line);
        Value v = p.parse_value();
        p.expect_end();
        if (doc[section].count(key)) fail(start_line, "duplicate key '" + key + "'");
        doc[section][key] = std::move(v);
    }
    return doc;
}

class Reader {
public:
    Reader(Table& table, std::string section) : table_(table), section_(std::move(section)) {}

    ~Reader() = default;

    void check_unknown() const {
        for (const auto& [key, value] : table_) {
            if (!used_.count(key)) fail(value.line, "unknown key '" + qualified(key) + "'");
        }
    }

    const Value* find(const std::string& key) {
        used_.insert(key);
        const auto it = table_.find(key);
        return it == table_.end() ? nullptr : &it->second;
    }

    void get(const std::string& key, std::string& out) {
        if (const Value* v = find(key)) out = as_string(*v, key);
    }
    void get(const std::string& key, double& out) {
        if (const Value* v = find(key)) out = as_number(*v, key);
    }
    void get(const std::string& key, int& out) {
        if (const Value* v = find(key)) out = as_int(*v, key);
    }
    void get(const std::string& key, bool& out) {
        if (const Value* v = find(key)) {
            if (!std::holds_alternative<bool>(v->data)) fail(v->line, qualified(key) + " must be true or false");
            out = std::get<bool>(v->data);
        }
    }
    void get(const std::string& key, std::vector<std::string>& out) {
        if (const Value* v = find(key)) {
            out.clear();
            for (const auto& item : as_array(*v, key)) out.push_back(as_string(item, key));
        }
    }
    void get(const std::string& key, std::vector<double>& out) {
        if (const Value* v = find(key)) {
            out.clear();
            for (const auto& item : as_array(*v, key)) out.push_back(as_number(item, key));
        }
    }

    std::string qualified(const std::string& key) const {
        return section_.empty() ? key : section_ + "." + key;
    }

    std::string as_string(const Value& v, const std::string& key) const {
        if (!std::holds_alternative<std::string>(v.data)) fail(v.line, qualified(key) + " must be a string");
        return std::get<std::string>(v.data);
    }
    double as_number(const Value& v, const std::string& key) const {
        if (!std::holds_alternative<double>(v.data)) fail(v.line, qualified(key) + " must be a number");
        return std::get<double>(v.data);
    }
    int as_int(const Value& v, const std::string& key) const {
        const double d = as_number(v, key);
        if (!v.integral || std::abs(d) > 2e9) fail(v.line, qualified(key) + " must be an integer");
        return static_cast<int>(d);
    }
    const Array& as_array(const Value& v, const std::string& key) const {
        if (!std::holds_alternative<Array>(v.data)) fail(v.line, qualified(key) + " must be an array");
        return std::get<Array>(v.data);
    }

private:
    Table& table_;
    std::string section_;
    std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

}  // namespace

SensorProfile sensor_preset(const std::string& name) {
    if (name == "sentinel2") return {"sentinel2", 10.0, 256, 128, 10.0, 0.5};
    if (name == "planetscope") return {"planetscope", 3.0, 384, 128, 3.0, 0.05};
    throw Error(ErrorKind::Config, "unknown sensor preset '" + name + "' (sentinel2, planetscope)");
}

void PipelineConfig::validate() const {
    if (!(sensor.pixel_size > 0.0)) config_error("sensor.pixel_size must be positive");
    if (sensor.tile_size < 1) config_error("sensor.tile_size must be >= 1");
    if (sensor.stride < 1 || sensor.stride > sensor.tile_size) {
        config_error("sensor.stride must satisfy 0 < stride <= tile_size");
    }
    if (!(sensor.half_width > 0.0)) config_error("sensor.half_width must be positive");
    if (sensor.min_area_ha < 0.0) config_error("sensor.min_area_ha must be >= 0");
    if (!(scale_divisor > 0.0)) config_error("ndvi.scale_divisor must be positive");
    double sum = 0.0;
    for (double f : split.fractions) {
        if (!(f > 0.0)) config_error("split.fractions must all be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "split.fractions must sum to 1 (got " << split.fractions[0] << ", " << split.fractions[1]
           << ", " << split.fractions[2] << " = " << sum << ")";
        config_error(os.str());
    }
    if (split.cell_size < 1) config_error("split.cell_size must be >= 1");
    if (postprocess.close_radius < 0) config_error("postprocess.close_radius must be >= 0");
    if (postprocess.expand_px < 0) config_error("postprocess.expand_px must be >= 0");
    if (postprocess.simplify_tolerance < 0.0) config_error("postprocess.simplify_tolerance must be >= 0");
    if (postprocess.min_area_ha < 0.0) config_error("postprocess.min_area_ha must be >= 0");
    for (std::size_t i = 1; i < bin_edges.size(); ++i) {
        if (!(bin_edges[i] > bin_edges[i - 1])) config_error("postprocess.bin_edges must increase");
    }
    if (bin_edges.empty()) config_error("postprocess.bin_edges must not be empty");
}

void PipelineConfig::validate_scenes() const {
    std::set<Date> group_dates;
    for (const auto& g : scene_groups) {
        if (!group_dates.insert(g.date).second) config_error("duplicate scene date " + g.date.to_string());
        if (g.scenes.empty()) config_error("scene group " + g.date.to_string() + " lists no scenes");
    }
    for (const auto& d : declared_dates) {
        if (!group_dates.count(d)) config_error("missing scene group for date " + d.to_string());
    }
    if (scene_groups.size() != 3) {
        config_error("exactly 3 dated scene groups are required, found " +
                     std::to_string(scene_groups.size()));
    }
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    Document doc = parse_document(text);
    static const std::set<std::string> kSections = {"",      "sensor", "ndvi",  "scenes",
                                                    "paths", "labels", "split", "tiling",
                                                    "postprocess"};
    for (const auto& [name, table] : doc) {
        if (!kSections.count(name)) {
            const int line = table.empty() ? 0 : table.begin()->second.line;
            fail(line, "unknown section [" + name + "]");
        }
    }

    PipelineConfig c;
    std::string preset = "sentinel2";
    std::vector<std::string> dates;
    std::string work_dir;
    {
        Reader root(doc[""], "");
        root.get("preset", preset);
        c.sensor = sensor_preset(preset);
        root.get("dates", dates);
        root.get("work_dir", work_dir);
        double seed = -1.0;
        root.get("seed", seed);
        if (seed >= 0.0) c.split.seed = static_cast<std::uint64_t>(seed);
        root.check_unknown();
    }
    if (!work_dir.empty()) c.work_dir = resolve(base_dir, work_dir);
    else c.work_dir = resolve(base_dir, "work");
    for (const auto& d : dates) c.declared_dates.push_back(Date::parse(d));
    {
        Reader r(doc["sensor"], "sensor");
        r.get("pixel_size", c.sensor.pixel_size);
        r.get("tile_size", c.sensor.tile_size);
        r.get("stride", c.sensor.stride);
        r.get("half_width", c.sensor.half_width);
        r.get("min_area_ha", c.sensor.min_area_ha);
        r.check_unknown();
    }
    {
        Reader r(doc["ndvi"], "ndvi");
        r.get("scale_divisor", c.scale_divisor);
        r.get("nodata", c.nodata);
        r.get("write_band_stack", c.write_band_stack);
        r.check_unknown();
    }
    for (const auto& [key, value] : doc["scenes"]) {
        Date date;
        try {
            date = Date::parse(key);
        } catch (const Error&) {
            fail(value.line, "scene group key '" + key + "' is not an ISO-8601 date");
        }
        SceneGroup group{date, {}};
        Reader r(doc["scenes"], "scenes");
        std::vector<std::string> files;
        if (std::holds_alternative<std::string>(value.data)) {
            files.push_back(std::get<std::string>(value.data));
        } else {
            r.get(key, files);
        }
        for (const auto& f : files) group.scenes.push_back(resolve(base_dir, f));
        c.scene_groups.push_back(std::move(group));
    }
    {
        Reader r(doc["paths"], "paths");
        std::string parcels;
        std::string reference;
        r.get("parcels", parcels);
        r.get("reference", reference);
        c.parcels = resolve(base_dir, parcels);
        c.reference = resolve(base_dir, reference);
        r.check_unknown();
    }
    {
        Reader r(doc["labels"], "labels");
        r.get("crop_attribute", c.crop_rule.attribute);
        if (const Value* v = r.find("crop_values")) {
            c.crop_rule.values.clear();
            if (std::holds_alternative<std::string>(v->data)) {
                c.crop_rule.values.push_back(std::get<std::string>(v->data));
            } else {
                for (const auto& item : r.as_array(*v, "crop_values")) {
                    if (std::holds_alternative<std::string>(item.data)) {
                        c.crop_rule.values.push_back(std::get<std::string>(item.data));
                    } else if (std::holds_alternative<bool>(item.data)) {
                        c.crop_rule.values.push_back(std::get<bool>(item.data) ? "true" : "false");
                    } else {
                        std::ostringstream os;
                        os << r.as_number(item, "crop_values");
                        c.crop_rule.values.push_back(os.str());
                    }
                }
            }
        }
        r.check_unknown();
    }
    {
        Reader r(doc["tiling"], "tiling");
        std::string policy = "snap-to-edge";
        r.get("edge_policy", policy);
        if (policy == "snap-to-edge") c.edge_policy = EdgePolicy::SnapToEdge;
        else if (policy == "drop-partial") c.edge_policy = EdgePolicy::DropPartial;
        else config_error("tiling.edge_policy must be snap-to-edge or drop-partial");
        r.check_unknown();
    }
    {
        Reader r(doc["split"], "split");
        std::vector<double> fractions;
        r.get("fractions", fractions);
        if (!fractions.empty()) {
            if (fractions.size() != 3) config_error("split.fractions needs 3 values (train, val, test)");
            c.split.fractions = {fractions[0], fractions[1], fractions[2]};
        }
        r.get("cell_size", c.split.cell_size);
        double seed = -1.0;
        r.get("seed", seed);
        if (seed >= 0.0) c.split.seed = static_cast<std::uint64_t>(seed);
        r.check_unknown();
    }
    c.postprocess = default_postprocess_params(c.sensor.pixel_size, c.sensor.half_width);
    c.postprocess.min_area_ha = c.sensor.min_area_ha;
    {
        Reader r(doc["postprocess"], "postprocess");
        r.get("close_radius", c.postprocess.close_radius);
        r.get("expand_px", c.postprocess.expand_px);
        r.get("simplify_tolerance", c.postprocess.simplify_tolerance);
        r.get("min_area_ha", c.postprocess.min_area_ha);
        r.get("bin_edges", c.bin_edges);
        r.get("histogram_svg", c.histogram_svg);
        r.check_unknown();
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open config");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

}  // namespace fieldpipe
