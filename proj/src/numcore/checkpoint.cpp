#include "mfd/numcore/checkpoint.hpp"

#include "mfd/error.hpp"
#include "mfd/util/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace mfd {

namespace {

constexpr const char* kMagic = "MFD1";

template <typename T>
constexpr const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

struct ParamRecord {
    std::string name;
    long rows = 0, cols = 0;
    std::string dtype;
    std::size_t offset = 0;
};

struct Header {
    CheckpointMeta meta;
    std::vector<ParamRecord> params;
    std::size_t payload_start = 0;
};

Header read_header(std::istream& in, const std::string& where) {
    Header h;
    std::string line;
    std::size_t consumed = 0;
    int line_no = 0;
    auto next = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        consumed += line.size() + 1;
        ++line_no;
        return true;
    };
    if (!next() || line != kMagic) throw ParseError(where + ": missing MFD1 magic");
    bool ended = false;
    while (next()) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "end") {
            ended = true;
            break;
        }
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls >> std::ws, value);
            h.meta[key] = value;
        } else if (tag == "param") {
            ParamRecord r;
            if (!(ls >> r.name >> r.rows >> r.cols >> r.dtype >> r.offset) || (r.dtype != "f32" && r.dtype != "f64")) {
                throw ParseError(where + ":" + std::to_string(line_no) + ": malformed param record");
            }
            h.params.push_back(r);
        } else {
            throw ParseError(where + ":" + std::to_string(line_no) + ": unknown header tag '" + tag + "'");
        }
    }
    if (!ended) throw ParseError(where + ": header not terminated by 'end'");
    h.payload_start = consumed;
    return h;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& params, const CheckpointMeta& meta) {
    std::ostringstream out;
    out << kMagic << "\n";
    for (const auto& [k, v] : meta) {
        if (k.find_first_of(" \n\t") != std::string::npos || v.find('\n') != std::string::npos) {
            throw ConfigError("checkpoint meta '" + k + "' contains whitespace/newline");
        }
        out << "meta " << k << " " << v << "\n";
    }
    std::size_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& v = params.value(i);
        out << "param " << params.name(i) << " " << v.rows() << " " << v.cols() << " " << dtype_name<T>() << " "
            << offset << "\n";
        offset += static_cast<std::size_t>(v.size()) * sizeof(T);
    }
    out << "end\n";
    std::string blob = out.str();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& v = params.value(i);
        blob.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(T));
    }
    write_file_atomic(path, blob);
}

template <typename T>
ParamStore<T> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    Header h = read_header(in, path.string());
    ParamStore<T> store;
    for (const auto& r : h.params) {
        const std::size_t width = r.dtype == "f32" ? 4 : 8;
        const std::size_t count = static_cast<std::size_t>(r.rows) * static_cast<std::size_t>(r.cols);
        const std::size_t begin = h.payload_start + r.offset;
        if (begin + count * width > bytes.size()) throw ParseError(path.string() + ": truncated payload for " + r.name);
        Matrix<T> m(r.rows, r.cols);
        for (std::size_t k = 0; k < count; ++k) {
            if (width == 4) {
                float f;
                std::memcpy(&f, bytes.data() + begin + k * 4, 4);
                m.data()[k] = static_cast<T>(f);
            } else {
                double d;
                std::memcpy(&d, bytes.data() + begin + k * 8, 8);
                m.data()[k] = static_cast<T>(d);
            }
        }
        store.add(r.name, std::move(m));
    }
    if (meta) *meta = std::move(h.meta);
    return store;
}

CheckpointMeta load_checkpoint_meta(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint " + path.string());
    return read_header(in, path.string()).meta;
}

template void save_checkpoint<float>(const std::filesystem::path&, const ParamStore<float>&, const CheckpointMeta&);
template void save_checkpoint<double>(const std::filesystem::path&, const ParamStore<double>&, const CheckpointMeta&);
template ParamStore<float> load_checkpoint<float>(const std::filesystem::path&, CheckpointMeta*);
template ParamStore<double> load_checkpoint<double>(const std::filesystem::path&, CheckpointMeta*);

}  // namespace mfd
