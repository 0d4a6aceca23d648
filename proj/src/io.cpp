#include "graspfield/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace graspfield::io {

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, const std::string& what) {
    throw_error(ErrorCode::ParseError, path.string() + ": " + what);
}

void require_exists(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw_error(ErrorCode::MissingFile, path.string());
    }
}

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::size_t ply_type_size(PlyType t) {
    switch (t) {
        case PlyType::I8:
        case PlyType::U8: return 1;
        case PlyType::I16:
        case PlyType::U16: return 2;
        case PlyType::I32:
        case PlyType::U32:
        case PlyType::F32: return 4;
        case PlyType::F64: return 8;
    }
    return 0;
}

PlyType parse_ply_type(const std::string& s, const std::filesystem::path& path) {
    if (s == "char" || s == "int8") return PlyType::I8;
    if (s == "uchar" || s == "uint8") return PlyType::U8;
    if (s == "short" || s == "int16") return PlyType::I16;
    if (s == "ushort" || s == "uint16") return PlyType::U16;
    if (s == "int" || s == "int32") return PlyType::I32;
    if (s == "uint" || s == "uint32") return PlyType::U32;
    if (s == "float" || s == "float32") return PlyType::F32;
    if (s == "double" || s == "float64") return PlyType::F64;
    parse_fail(path, "unknown property type '" + s + "'");
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::F32;
    bool is_list = false;
    PlyType count_type = PlyType::U8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

double read_binary_scalar(std::istream& in, PlyType t, const std::filesystem::path& path) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(ply_type_size(t)));
    if (!in) parse_fail(path, "unexpected end of binary payload");
    switch (t) {
        case PlyType::I8: return static_cast<signed char>(buf[0]);
        case PlyType::U8: return buf[0];
        case PlyType::I16: {
            std::int16_t v;
            std::memcpy(&v, buf, 2);
            return v;
        }
        case PlyType::U16: {
            std::uint16_t v;
            std::memcpy(&v, buf, 2);
            return v;
        }
        case PlyType::I32: {
            std::int32_t v;
            std::memcpy(&v, buf, 4);
            return v;
        }
        case PlyType::U32: {
            std::uint32_t v;
            std::memcpy(&v, buf, 4);
            return v;
        }
        case PlyType::F32: {
            float v;
            std::memcpy(&v, buf, 4);
            return v;
        }
        case PlyType::F64: {
            double v;
            std::memcpy(&v, buf, 8);
            return v;
        }
    }
    return 0.0;
}

double read_ascii_scalar(std::istream& in, const std::filesystem::path& path) {
    double v;
    if (!(in >> v)) parse_fail(path, "unexpected end of ascii payload");
    return v;
}

}  // namespace

LoadedGeometry load_ply(const std::filesystem::path& path) {
    require_exists(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_error(ErrorCode::MissingFile, path.string());

    std::string line;
    if (!std::getline(in, line)) parse_fail(path, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") parse_fail(path, "missing ply magic");

    bool binary = false;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") {
                binary = true;
            } else if (fmt == "ascii") {
                binary = false;
            } else {
                parse_fail(path, "unsupported format '" + fmt + "'");
            }
        } else if (tok == "element") {
            PlyElement el;
            ls >> el.name >> el.count;
            elements.push_back(el);
        } else if (tok == "property") {
            if (elements.empty()) parse_fail(path, "property before element");
            PlyProperty prop;
            std::string type_tok;
            ls >> type_tok;
            if (type_tok == "list") {
                std::string count_tok, value_tok;
                ls >> count_tok >> value_tok >> prop.name;
                prop.is_list = true;
                prop.count_type = parse_ply_type(count_tok, path);
                prop.type = parse_ply_type(value_tok, path);
            } else {
                prop.type = parse_ply_type(type_tok, path);
                ls >> prop.name;
            }
            elements.back().properties.push_back(prop);
        } else if (tok == "end_header") {
            break;
        } else {
            parse_fail(path, "unexpected header token '" + tok + "'");
        }
    }

    LoadedGeometry out;
    bool saw_normals = false;
    for (const PlyElement& el : elements) {
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face";
        if (is_vertex) {
            out.cloud.points.resize(el.count, Vec3::Zero());
        }
        for (std::size_t i = 0; i < el.count; ++i) {
            for (const PlyProperty& prop : el.properties) {
                if (prop.is_list) {
                    const double raw_n = binary ? read_binary_scalar(in, prop.count_type, path)
                                                : read_ascii_scalar(in, path);
                    const auto n = static_cast<std::size_t>(raw_n);
                    std::vector<double> values(n);
                    for (std::size_t k = 0; k < n; ++k) {
                        values[k] = binary ? read_binary_scalar(in, prop.type, path)
                                           : read_ascii_scalar(in, path);
                    }
                    if (is_face && prop.name == "vertex_indices") {
                        if (n < 3) parse_fail(path, "face with fewer than 3 indices");
                        for (std::size_t k = 2; k < n; ++k) {
                            out.faces.push_back({static_cast<int>(values[0]),
                                                 static_cast<int>(values[k - 1]),
                                                 static_cast<int>(values[k])});
                        }
                    }
                } else {
                    const double v = binary ? read_binary_scalar(in, prop.type, path)
                                            : read_ascii_scalar(in, path);
                    if (!is_vertex) continue;
                    if (prop.name == "x") out.cloud.points[i].x() = v;
                    else if (prop.name == "y") out.cloud.points[i].y() = v;
                    else if (prop.name == "z") out.cloud.points[i].z() = v;
                    else if (prop.name == "nx" || prop.name == "ny" || prop.name == "nz") {
                        if (!saw_normals) {
                            out.cloud.normals.resize(el.count, Vec3::Zero());
                            saw_normals = true;
                        }
                        const int axis = prop.name == "nx" ? 0 : (prop.name == "ny" ? 1 : 2);
                        out.cloud.normals[i][axis] = v;
                    } else if (prop.name == "label") {
                        if (out.cloud.labels.empty()) out.cloud.labels.resize(el.count, 0);
                        out.cloud.labels[i] = static_cast<int>(v);
                    }
                }
            }
        }
    }

    if (out.cloud.points.empty()) parse_fail(path, "no vertex element");

    if (saw_normals) {
        bool all_zero = true;
        for (const Vec3& n : out.cloud.normals) {
            if (n.squaredNorm() > 0.0) {
                all_zero = false;
                break;
            }
        }
        if (all_zero) {
            out.cloud.normals.clear();
        } else {
            for (Vec3& n : out.cloud.normals) {
                const double len = n.norm();
                if (len <= 0.0) parse_fail(path, "zero-length normal");
                n /= len;
            }
        }
    }
    return out;
}

LoadedGeometry load_obj(const std::filesystem::path& path) {
    require_exists(path);
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::MissingFile, path.string());

    LoadedGeometry out;
    std::vector<Vec3> normals;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z())) parse_fail(path, "bad vertex line");
            out.cloud.points.push_back(p);
        } else if (tok == "vn") {
            Vec3 n;
            if (!(ls >> n.x() >> n.y() >> n.z())) parse_fail(path, "bad normal line");
            normals.push_back(n);
        } else if (tok == "f") {
            std::vector<int> idx;
            std::string corner;
            while (ls >> corner) {
                // forms: v, v/t, v//n, v/t/n
                const std::size_t slash = corner.find('/');
                const std::string vpart = corner.substr(0, slash);
                int vi = 0;
                try {
                    vi = std::stoi(vpart);
                } catch (const std::exception&) {
                    parse_fail(path, "bad face corner '" + corner + "'");
                }
                if (vi < 0) vi = static_cast<int>(out.cloud.points.size()) + vi + 1;
                idx.push_back(vi - 1);
            }
            if (idx.size() < 3) parse_fail(path, "face with fewer than 3 corners");
            for (std::size_t k = 2; k < idx.size(); ++k) {
                out.faces.push_back({idx[0], idx[k - 1], idx[k]});
            }
        }
    }
    if (out.cloud.points.empty()) parse_fail(path, "no vertices");

    if (normals.size() == out.cloud.points.size()) {
        out.cloud.normals = std::move(normals);
        for (Vec3& n : out.cloud.normals) {
            const double len = n.norm();
            if (len <= 0.0) parse_fail(path, "zero-length normal");
            n /= len;
        }
    }
    return out;
}

LoadedGeometry load_geometry(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".ply") return load_ply(path);
    if (ext == ".obj") return load_obj(path);
    throw_error(ErrorCode::ParseError, "unsupported geometry extension '" + ext + "'");
}

void save_ply(const std::filesystem::path& path, const OrientedPointCloud& cloud,
              const std::vector<std::array<int, 3>>* faces) {
    std::ofstream outs(path, std::ios::binary);
    if (!outs) throw_error(ErrorCode::MissingFile, "cannot open for write: " + path.string());

    const std::size_t n = cloud.size();
    outs << "ply\nformat binary_little_endian 1.0\n";
    outs << "element vertex " << n << "\n";
    outs << "property float x\nproperty float y\nproperty float z\n";
    outs << "property float nx\nproperty float ny\nproperty float nz\n";
    if (cloud.has_labels()) outs << "property int label\n";
    if (faces != nullptr && !faces->empty()) {
        outs << "element face " << faces->size() << "\n";
        outs << "property list uchar int vertex_indices\n";
    }
    outs << "end_header\n";

    for (std::size_t i = 0; i < n; ++i) {
        float row[6] = {static_cast<float>(cloud.points[i].x()),
                        static_cast<float>(cloud.points[i].y()),
                        static_cast<float>(cloud.points[i].z()),
                        0.0f,
                        0.0f,
                        0.0f};
        if (cloud.has_normals()) {
            row[3] = static_cast<float>(cloud.normals[i].x());
            row[4] = static_cast<float>(cloud.normals[i].y());
            row[5] = static_cast<float>(cloud.normals[i].z());
        }
        outs.write(reinterpret_cast<const char*>(row), sizeof(row));
        if (cloud.has_labels()) {
            const std::int32_t label = cloud.labels[i];
            outs.write(reinterpret_cast<const char*>(&label), sizeof(label));
        }
    }
    if (faces != nullptr) {
        for (const auto& f : *faces) {
            const unsigned char count = 3;
            outs.write(reinterpret_cast<const char*>(&count), 1);
            std::int32_t idx[3] = {f[0], f[1], f[2]};
            outs.write(reinterpret_cast<const char*>(idx), sizeof(idx));
        }
    }
}

void save_obj(const std::filesystem::path& path, const OrientedPointCloud& cloud,
              const std::vector<std::array<int, 3>>* faces) {
    std::ofstream outs(path);
    if (!outs) throw_error(ErrorCode::MissingFile, "cannot open for write: " + path.string());

    char buf[128];
    for (const Vec3& p : cloud.points) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", p.x(), p.y(), p.z());
        outs << buf;
    }
    for (const Vec3& nrm : cloud.normals) {
        std::snprintf(buf, sizeof(buf), "vn %.17g %.17g %.17g\n", nrm.x(), nrm.y(), nrm.z());
        outs << buf;
    }
    if (faces != nullptr) {
        const bool with_normals = cloud.has_normals();
        for (const auto& f : *faces) {
            if (with_normals) {
                std::snprintf(buf, sizeof(buf), "f %d//%d %d//%d %d//%d\n", f[0] + 1, f[0] + 1,
                              f[1] + 1, f[1] + 1, f[2] + 1, f[2] + 1);
            } else {
                std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
            }
            outs << buf;
        }
    }
}

}  // namespace graspfield::io
