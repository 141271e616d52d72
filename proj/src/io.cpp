#include "ca50/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ca50/errors.hpp"

namespace ca50::io {

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

double parse_double(const std::string& tok, const std::string& context) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ConfigError(context + ": cannot parse number '" + tok + "'");
    }
    if (pos != tok.size() || !std::isfinite(v)) {
        throw ConfigError(context + ": cannot parse number '" + tok + "'");
    }
    return v;
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path);
}

KeyValueFile KeyValueFile::parse_text(const std::string& text,
                                      const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        auto toks = split_tokens(line);
        if (toks.empty()) continue;
        const std::string key = toks.front();
        toks.erase(toks.begin());
        if (toks.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": key '" + key + "' has no value");
        }
        if (kv.entries_.count(key) != 0) {
            throw ConfigError(origin + ": duplicate key '" + key + "'");
        }
        kv.entries_[key] = std::move(toks);
        kv.order_.push_back(key);
    }
    return kv;
}

bool KeyValueFile::has(const std::string& key) const {
    return entries_.count(key) != 0;
}

const std::vector<std::string>& KeyValueFile::tokens(
    const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError(origin_ + ": missing key '" + key + "'");
    }
    return it->second;
}

std::string KeyValueFile::get_string(const std::string& key) const {
    const auto& t = tokens(key);
    if (t.size() != 1) {
        throw ConfigError(origin_ + ": key '" + key + "' expects one value");
    }
    return t.front();
}

double KeyValueFile::get_double(const std::string& key) const {
    return parse_double(get_string(key), origin_ + " key '" + key + "'");
}

long KeyValueFile::get_long(const std::string& key) const {
    const double v = get_double(key);
    const long l = static_cast<long>(v);
    if (static_cast<double>(l) != v) {
        throw ConfigError(origin_ + ": key '" + key + "' expects an integer");
    }
    return l;
}

std::vector<double> KeyValueFile::get_doubles(const std::string& key,
                                              std::size_t expected) const {
    const auto& t = tokens(key);
    if (t.size() != expected) {
        throw ConfigError(origin_ + ": key '" + key + "' expects " +
                          std::to_string(expected) + " values, got " +
                          std::to_string(t.size()));
    }
    std::vector<double> out;
    out.reserve(t.size());
    for (const auto& tok : t) {
        out.push_back(parse_double(tok, origin_ + " key '" + key + "'"));
    }
    return out;
}

double KeyValueFile::get_double_or(const std::string& key,
                                   double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

void KeyValueFile::require_known_keys(
    const std::vector<std::string>& allowed) const {
    for (const auto& key : order_) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(origin_ + ": unknown key '" + key + "'");
        }
    }
}

// --- coefficient tables ----------------------------------------------

namespace {
const std::vector<std::string> kPerCylinderKeys = {
    "c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9"};
const std::vector<std::string> kSharedKeys = {
    "c10", "c11", "c12", "c13", "c14", "c16", "c17", "c18", "k_c"};
}  // namespace

CoefficientSet load_coefficients(const std::string& path) {
    const auto kv = KeyValueFile::parse_file(path);
    std::vector<std::string> allowed = kPerCylinderKeys;
    allowed.insert(allowed.end(), kSharedKeys.begin(), kSharedKeys.end());
    kv.require_known_keys(allowed);  // no unit overrides, no extras

    CoefficientSet set;
    auto assign = [&](const std::string& key, double IntakeCoefficients::*mem) {
        const auto vals = kv.get_doubles(key, kNumCylinders);
        for (int i = 0; i < kNumCylinders; ++i) {
            set.intake[static_cast<std::size_t>(i)].*mem = vals[static_cast<std::size_t>(i)];
        }
    };
    assign("c1", &IntakeCoefficients::c1);
    assign("c2", &IntakeCoefficients::c2);
    assign("c3", &IntakeCoefficients::c3);
    assign("c4", &IntakeCoefficients::c4);
    assign("c5", &IntakeCoefficients::c5);
    assign("c6", &IntakeCoefficients::c6);
    assign("c7", &IntakeCoefficients::c7);
    assign("c8", &IntakeCoefficients::c8);
    assign("c9", &IntakeCoefficients::c9);

    auto& cc = set.combustion;
    cc.c10 = kv.get_double("c10");
    cc.c11 = kv.get_double("c11");
    cc.c12 = kv.get_double("c12");
    cc.c13 = kv.get_double("c13");
    cc.c14 = kv.get_double("c14");
    cc.c16 = kv.get_double("c16");
    cc.c17 = kv.get_double("c17");
    cc.c18 = kv.get_double("c18");
    cc.k_c = kv.get_double("k_c");
    // the raw burn-duration scale is not part of the table; derive it so
    // the Wiebe route and the composite c18 route agree by construction
    cc.c15 = cc.c18 / WiebeParams{}.midburn_scale();

    set.validate();
    return set;
}

void save_coefficients(const std::string& path, const CoefficientSet& set,
                       const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write file: " + path);
    if (!header_comment.empty()) {
        std::istringstream lines(header_comment);
        std::string line;
        while (std::getline(lines, line)) out << "# " << line << "\n";
    }
    out << "# intake coefficients, columns = cylinders 1..6\n";
    auto row = [&](const std::string& key, double IntakeCoefficients::*mem) {
        out << key;
        for (const auto& cyl : set.intake) out << " " << format_double(cyl.*mem);
        out << "\n";
    };
    row("c1", &IntakeCoefficients::c1);
    row("c2", &IntakeCoefficients::c2);
    row("c3", &IntakeCoefficients::c3);
    row("c4", &IntakeCoefficients::c4);
    row("c5", &IntakeCoefficients::c5);
    row("c6", &IntakeCoefficients::c6);
    row("c7", &IntakeCoefficients::c7);
    row("c8", &IntakeCoefficients::c8);
    row("c9", &IntakeCoefficients::c9);
    out << "# shared combustion coefficients\n";
    const auto& cc = set.combustion;
    out << "c10 " << format_double(cc.c10) << "\n";
    out << "c11 " << format_double(cc.c11) << "\n";
    out << "c12 " << format_double(cc.c12) << "\n";
    out << "c13 " << format_double(cc.c13) << "\n";
    out << "c14 " << format_double(cc.c14) << "\n";
    out << "c16 " << format_double(cc.c16) << "\n";
    out << "c17 " << format_double(cc.c17) << "\n";
    out << "c18 " << format_double(cc.c18) << "\n";
    out << "k_c " << format_double(cc.k_c) << "\n";
}

std::uint64_t fnv1a_file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

// --- record streams ---------------------------------------------------

std::string format_double(double v) {
    // shortest representation that still round-trips the double exactly,
    // so offline recomputation from the CSV matches the in-memory run
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace {

const char* status_name(CycleStatus s) {
    switch (s) {
        case CycleStatus::ok: return "ok";
        case CycleStatus::no_injection: return "no_injection";
        case CycleStatus::misfire: return "misfire";
    }
    return "?";
}

CycleStatus status_from_name(const std::string& s) {
    if (s == "ok") return CycleStatus::ok;
    if (s == "no_injection") return CycleStatus::no_injection;
    if (s == "misfire") return CycleStatus::misfire;
    throw ConfigError("unknown cycle status '" + s + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

constexpr const char* kRecordHeader =
    "cycle,time_s,cylinder,status,soi,soc,bd,ca50_true,ca50_measured,"
    "p_ivc,t_ivc,p_soi,t_soi,egr,x_r,p_im,x1_hat,x2_hat,soi_clamped";

}  // namespace

void write_records_csv(const std::string& path, const RecordFileHeader& header,
                       const std::vector<CycleRecord>& records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << "# seed=" << header.seed << "\n";
    out << "# preset=" << header.preset << "\n";
    out << "# controller=" << header.controller << "\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(header.coefficients_checksum));
    out << "# coefficients_checksum=" << buf << "\n";
    out << kRecordHeader << "\n";
    for (const auto& r : records) {
        out << r.cycle_index << "," << format_double(r.sim_time_s) << ","
            << r.cylinder_index << "," << status_name(r.status) << ",";
        const bool injected = r.status != CycleStatus::no_injection;
        const bool burned = r.status == CycleStatus::ok;
        auto field = [&](double v, bool present) {
            if (present) out << format_double(v);
            out << ",";
        };
        field(r.soi_cad, injected);
        field(r.soc_cad, burned);
        field(r.bd_cad, burned);
        field(r.ca50_true_cad, burned);
        field(r.ca50_measured_cad, burned);
        field(r.p_ivc_bar, true);
        field(r.t_ivc_k, true);
        field(r.p_soi_bar, injected);
        field(r.t_soi_k, injected);
        field(r.egr, true);
        field(r.x_r, true);
        field(r.p_im_bar, true);
        field(r.x1_hat, true);
        field(r.x2_hat, true);
        out << (r.soi_clamped ? 1 : 0) << "\n";
    }
}

std::vector<CycleRecord> read_records_csv(const std::string& path,
                                          RecordFileHeader* header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::vector<CycleRecord> records;
    std::string line;
    bool saw_header_row = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header != nullptr) {
                auto eq = line.find('=');
                if (eq != std::string::npos) {
                    const std::string key = line.substr(2, eq - 2);
                    const std::string val = line.substr(eq + 1);
                    if (key == "seed") header->seed = std::stoull(val);
                    if (key == "preset") header->preset = val;
                    if (key == "controller") header->controller = val;
                    if (key == "coefficients_checksum") {
                        header->coefficients_checksum =
                            std::stoull(val, nullptr, 16);
                    }
                }
            }
            continue;
        }
        if (!saw_header_row) {
            if (line != kRecordHeader) {
                throw ConfigError(path + ": unexpected record header row");
            }
            saw_header_row = true;
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 19) {
            throw ConfigError(path + ": malformed record row");
        }
        CycleRecord r;
        auto num = [&](const std::string& tok) {
            return tok.empty() ? 0.0 : parse_double(tok, path);
        };
        r.cycle_index = static_cast<std::int64_t>(num(f[0]));
        r.sim_time_s = num(f[1]);
        r.cylinder_index = static_cast<int>(num(f[2]));
        r.status = status_from_name(f[3]);
        r.soi_cad = num(f[4]);
        r.soc_cad = num(f[5]);
        r.bd_cad = num(f[6]);
        r.ca50_true_cad = num(f[7]);
        r.ca50_measured_cad = num(f[8]);
        r.p_ivc_bar = num(f[9]);
        r.t_ivc_k = num(f[10]);
        r.p_soi_bar = num(f[11]);
        r.t_soi_k = num(f[12]);
        r.egr = num(f[13]);
        r.x_r = num(f[14]);
        r.p_im_bar = num(f[15]);
        r.x1_hat = num(f[16]);
        r.x2_hat = num(f[17]);
        r.soi_clamped = f[18] == "1";
        records.push_back(r);
    }
    return records;
}

}  // namespace ca50::io

// --- coefficient sanity ------------------------------------------------

namespace ca50 {

void CoefficientSet::validate() const {
    for (int i = 0; i < kNumCylinders; ++i) {
        const auto& c = intake[static_cast<std::size_t>(i)];
        if (!(c.c6 > 0.0) || !(c.c7 > 0.0)) {
            throw ConfigError(
                "intake coefficients cylinder " + std::to_string(i + 1) +
                ": c6 and c7 must be positive for the published model form");
        }
    }
    const auto& cc = combustion;
    if (!(cc.c13 > 0.0)) throw ConfigError("c13 must be positive");
    if (!(cc.c14 < 0.0)) throw ConfigError("c14 must be negative");
    if (!(cc.c16 > 0.0)) throw ConfigError("c16 must be positive");
    if (!(cc.c18 > 0.0)) throw ConfigError("c18 must be positive");
    if (!(cc.k_c > 1.0)) throw ConfigError("k_c must exceed 1");
    // c10 EGR + c11 must stay positive over the whole EGR range
    if (!(cc.c11 > 0.0) || !(cc.c10 + cc.c11 > 0.0)) {
        throw ConfigError("c10*EGR + c11 must be positive over EGR in [0,1]");
    }
}

}  // namespace ca50
