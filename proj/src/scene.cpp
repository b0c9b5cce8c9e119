#include "sctx/scene.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sctx/rng.hpp"

namespace sctx {
namespace {

constexpr double kMinHitDistance = 1e-6;

constexpr std::array<const char*, kRoomFaceCount> kFaceNames = {"xmin", "xmax",  "ymin",
                                                                "ymax", "floor", "ceiling"};

// In-plane axes for a face whose normal is along `axis`.
std::pair<int, int> plane_axes(int axis) {
    switch (axis) {
        case 0: return {1, 2};
        case 1: return {0, 2};
        default: return {0, 1};
    }
}

bool in_range(const Vec3f& c) { return (c.array() >= 0.0f).all() && (c.array() <= 1.0f).all(); }

void check_radiance(const Radiance& r, const std::string& where) {
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            bool ok = true;
            if constexpr (std::is_same_v<T, Solid>) ok = in_range(v.rgb);
            if constexpr (std::is_same_v<T, Checker>) ok = in_range(v.a) && in_range(v.b) && v.period > 0;
            if constexpr (std::is_same_v<T, AxisGradient>)
                ok = in_range(v.low) && in_range(v.high) && v.axis >= 0 && v.axis < 3;
            if (!ok) throw InvalidArgument("invalid radiance on " + where);
        },
        r);
}

Vec3f eval_radiance(const Radiance& r, const Box& extent, int axis, const Vec3d& p) {
    return std::visit(
        [&](const auto& v) -> Vec3f {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Solid>) {
                return v.rgb;
            } else if constexpr (std::is_same_v<T, Checker>) {
                const auto [a, b] = plane_axes(axis);
                const double cell = v.period / 2.0;
                const auto ia = static_cast<long long>(std::floor(p[a] / cell));
                const auto ib = static_cast<long long>(std::floor(p[b] / cell));
                return ((ia + ib) % 2 == 0) ? v.a : v.b;
            } else {
                const double span = extent.max[v.axis] - extent.min[v.axis];
                const double t = std::clamp((p[v.axis] - extent.min[v.axis]) / span, 0.0, 1.0);
                return (v.low.template cast<double>() * (1.0 - t) +
                        v.high.template cast<double>() * t)
                    .template cast<float>();
            }
        },
        r);
}

}  // namespace

void SceneSpec::validate() const {
    for (int a = 0; a < 3; ++a)
        if (!(room.min[a] < room.max[a])) throw InvalidArgument("room min must be < max per axis");
    for (int f = 0; f < kRoomFaceCount; ++f) check_radiance(faces[f], kFaceNames[f]);
    for (const auto& o : obstacles) {
        for (int a = 0; a < 3; ++a) {
            if (!(o.box.min[a] < o.box.max[a]))
                throw InvalidArgument("obstacle " + o.name + ": min must be < max");
            if (o.box.min[a] < room.min[a] || o.box.max[a] > room.max[a])
                throw InvalidArgument("obstacle " + o.name + " is not inside the room");
        }
        check_radiance(o.radiance, "obstacle " + o.name);
    }
    for (const auto& patch : patches) {
        if (patch.surface_id < 0 || patch.surface_id >= surface_count())
            throw InvalidArgument("patch surface id out of range");
        if (!in_range(patch.rgb)) throw InvalidArgument("patch radiance outside [0,1]");
        const int obstacle = patch.surface_id / kRoomFaceCount - 1;
        const int face = patch.surface_id % kRoomFaceCount;
        const Box& host = obstacle < 0 ? room : obstacles[obstacle].box;
        const auto [a, b] = plane_axes(face / 2);
        if (!(patch.min.x() < patch.max.x() && patch.min.y() < patch.max.y()) ||
            patch.min.x() < host.min[a] || patch.max.x() > host.max[a] ||
            patch.min.y() < host.min[b] || patch.max.y() > host.max[b])
            throw InvalidArgument("patch rectangle does not lie on its host face");
    }
}

bool SceneSpec::free_space(const Vec3d& p) const {
    if (!room.contains_strict(p)) return false;
    for (const auto& o : obstacles) {
        if ((p.array() >= o.box.min.array()).all() && (p.array() <= o.box.max.array()).all())
            return false;
    }
    return true;
}

SceneSpec SceneSpec::default_scene() {
    SceneSpec s;
    s.room = {Vec3d(-3, -3, 0), Vec3d(3, 3, 3)};
    s.faces[int(RoomFace::XMin)] = Checker{{0.08f, 0.064f, 0.048f}, {0.104f, 0.084f, 0.06f}, 0.5};
    s.faces[int(RoomFace::XMax)] = Checker{{0.064f, 0.08f, 0.056f}, {0.088f, 0.104f, 0.072f}, 0.5};
    s.faces[int(RoomFace::YMin)] = Checker{{0.056f, 0.064f, 0.088f}, {0.08f, 0.088f, 0.112f}, 0.5};
    s.faces[int(RoomFace::YMax)] = Checker{{0.096f, 0.056f, 0.048f}, {0.12f, 0.08f, 0.064f}, 0.5};
    s.faces[int(RoomFace::Floor)] = Solid{{0.048f, 0.04f, 0.032f}};
    s.faces[int(RoomFace::Ceiling)] = Solid{{0.12f, 0.12f, 0.128f}};
    s.obstacles.push_back({"box", {Vec3d(1.2, -2.2, 0.0), Vec3d(2.2, -1.2, 1.0)},
                           Solid{{0.12f, 0.088f, 0.056f}}});
    s.patches.push_back({int(RoomFace::Ceiling), {-0.5, -0.5}, {0.5, 0.5}, {1.0f, 1.0f, 1.0f}});
    return s;
}

Vec3f surface_radiance(const SceneSpec& scene, int surface_id, const Vec3d& point) {
    const int face = surface_id % kRoomFaceCount;
    const int axis = face / 2;
    const auto [a, b] = plane_axes(axis);
    for (const auto& patch : scene.patches) {
        if (patch.surface_id != surface_id) continue;
        if (point[a] >= patch.min.x() && point[a] <= patch.max.x() && point[b] >= patch.min.y() &&
            point[b] <= patch.max.y())
            return patch.rgb;
    }
    const int obstacle = surface_id / kRoomFaceCount - 1;
    if (obstacle < 0) return eval_radiance(scene.faces[face], scene.room, axis, point);
    const auto& o = scene.obstacles.at(obstacle);
    return eval_radiance(o.radiance, o.box, axis, point);
}

Hit raycast(const SceneSpec& scene, const Vec3d& origin, const Vec3d& dir) {
    if (!scene.room.contains_strict(origin)) throw InvalidArgument("raycast origin outside room");
    if (!scene.free_space(origin)) throw InvalidArgument("raycast origin inside an obstacle");

    double best_t = std::numeric_limits<double>::infinity();
    int best_id = -1;

    // Room faces, seen from inside.
    for (int axis = 0; axis < 3; ++axis) {
        if (dir[axis] == 0.0) continue;
        const bool positive = dir[axis] > 0.0;
        const double plane = positive ? scene.room.max[axis] : scene.room.min[axis];
        const double t = (plane - origin[axis]) / dir[axis];
        if (t > kMinHitDistance && t < best_t) {
            best_t = t;
            best_id = 2 * axis + (positive ? 1 : 0);
        }
    }

    // Obstacles, seen from outside: slab test, entering face.
    for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
        const Box& box = scene.obstacles[i].box;
        double t_enter = -std::numeric_limits<double>::infinity();
        double t_exit = std::numeric_limits<double>::infinity();
        int enter_face = -1;
        bool missed = false;
        for (int axis = 0; axis < 3 && !missed; ++axis) {
            if (dir[axis] == 0.0) {
                if (origin[axis] < box.min[axis] || origin[axis] > box.max[axis]) missed = true;
                continue;
            }
            double t0 = (box.min[axis] - origin[axis]) / dir[axis];
            double t1 = (box.max[axis] - origin[axis]) / dir[axis];
            int face0 = 2 * axis;  // min face entered when moving in +axis
            if (t0 > t1) {
                std::swap(t0, t1);
                face0 = 2 * axis + 1;
            }
            if (t0 > t_enter) {
                t_enter = t0;
                enter_face = face0;
            }
            t_exit = std::min(t_exit, t1);
        }
        if (missed || t_enter > t_exit || t_enter <= kMinHitDistance) continue;
        if (t_enter < best_t) {
            best_t = t_enter;
            best_id = kRoomFaceCount * (1 + int(i)) + enter_face;
        }
    }

    Hit hit;
    hit.t = best_t;
    hit.surface_id = best_id;
    hit.point = origin + best_t * dir;
    // Snap the hit coordinate onto its plane so face lookups are exact.
    const int axis = (best_id % kRoomFaceCount) / 2;
    const bool max_side = (best_id % kRoomFaceCount) % 2 == 1;
    const int obstacle = best_id / kRoomFaceCount - 1;
    if (obstacle < 0) {
        hit.point[axis] = max_side ? scene.room.max[axis] : scene.room.min[axis];
    } else {
        const Box& box = scene.obstacles[obstacle].box;
        hit.point[axis] = max_side ? box.max[axis] : box.min[axis];
    }
    hit.radiance = surface_radiance(scene, best_id, hit.point);
    return hit;
}

RGBDFrame render_frame(const SceneSpec& scene, const Posed& pose, const CameraIntrinsics& k,
                       const RenderOptions& options) {
    if (!k.valid()) throw InvalidArgument("render_frame: invalid intrinsics");
    RGBDFrame frame(k);
    frame.pose = pose;
    frame.timestamp = options.timestamp;
    frame.user_id = options.user_id;

    const Eigen::Matrix3d rot = pose.rotation_matrix();
    Rng noise(options.noise_seed);
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            const Vec3d ray_cam = pixel_ray<double>(k, u, v).normalized();
            const Hit hit = raycast(scene, pose.translation, rot * ray_cam);
            const auto i = frame.index(u, v);
            double depth = hit.t * ray_cam.z();
            if (options.depth_noise > 0.0) depth *= 1.0 + options.depth_noise * noise.normal();
            frame.depth[i] = depth > 0.0 ? float(depth) : RGBDFrame::kInvalidDepth;
            frame.rgb.row(i) = hit.radiance.transpose();
        }
    }
    return frame;
}

EnvMap render_panorama(const SceneSpec& scene, const Vec3d& position, const EquirectGrid& grid) {
    EnvMap map(grid, position, Vec3f::Zero());
    for (int v = 0; v < grid.height; ++v) {
        for (int u = 0; u < grid.width; ++u) {
            const Hit hit = raycast(scene, position, pixel_to_dir<double>(grid, u, v));
            const auto i = map.index(u, v);
            map.rgb.row(i) = hit.radiance.transpose();
            map.valid[std::size_t(i)] = 1;
        }
    }
    return map;
}

// ---------------------------------------------------------------------------
// Config I/O

namespace {

std::vector<double> numbers(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InvalidArgument(key + ": expected a number, got '" + tok + "'");
        }
    }
    return out;
}

Vec3d vec3(const std::string& text, const std::string& key) {
    const auto v = numbers(text, key);
    if (v.size() != 3) throw InvalidArgument(key + ": expected 3 numbers");
    return {v[0], v[1], v[2]};
}

Vec3f color(const std::vector<double>& v, std::size_t at) {
    return Vec3d(v[at], v[at + 1], v[at + 2]).cast<float>();
}

int axis_index(const std::string& s, const std::string& key) {
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    throw InvalidArgument(key + ": gradient axis must be x, y or z");
}

Radiance parse_radiance(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string kind;
    in >> kind;
    std::string rest;
    std::getline(in, rest);
    if (kind == "solid") {
        const auto v = numbers(rest, key);
        if (v.size() != 3) throw InvalidArgument(key + ": solid needs r g b");
        return Solid{color(v, 0)};
    }
    if (kind == "checker") {
        const auto v = numbers(rest, key);
        if (v.size() != 7) throw InvalidArgument(key + ": checker needs r g b r g b period");
        return Checker{color(v, 0), color(v, 3), v[6]};
    }
    if (kind == "gradient") {
        std::istringstream parts(rest);
        std::vector<std::string> toks;
        for (std::string t; parts >> t;) toks.push_back(t);
        if (toks.size() != 7) throw InvalidArgument(key + ": gradient needs r g b r g b axis");
        std::string nums;
        for (int i = 0; i < 6; ++i) nums += toks[i] + ' ';
        const auto v = numbers(nums, key);
        return AxisGradient{color(v, 0), color(v, 3), axis_index(toks[6], key)};
    }
    throw InvalidArgument(key + ": unknown radiance kind '" + kind + "'");
}

int parse_surface(const std::string& text, const SceneSpec& scene) {
    for (int f = 0; f < kRoomFaceCount; ++f)
        if (text == kFaceNames[f]) return f;
    // obstacle:<name>:<face>
    const auto c1 = text.find(':');
    const auto c2 = text.rfind(':');
    if (text.rfind("obstacle:", 0) == 0 && c2 != c1) {
        const std::string name = text.substr(c1 + 1, c2 - c1 - 1);
        const std::string face = text.substr(c2 + 1);
        for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
            if (scene.obstacles[i].name != name) continue;
            for (int f = 0; f < kRoomFaceCount; ++f)
                if (face == kFaceNames[f]) return kRoomFaceCount * (1 + int(i)) + f;
        }
    }
    throw InvalidArgument("patch surface: unknown surface '" + text + "'");
}

std::string format_color(const Vec3f& c) { return fmt::format("{} {} {}", c.x(), c.y(), c.z()); }

std::string format_radiance(const Radiance& r) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Solid>) return "solid " + format_color(v.rgb);
            if constexpr (std::is_same_v<T, Checker>)
                return fmt::format("checker {} {} {}", format_color(v.a), format_color(v.b),
                                   v.period);
            if constexpr (std::is_same_v<T, AxisGradient>)
                return fmt::format("gradient {} {} {}", format_color(v.low), format_color(v.high),
                                   "xyz"[v.axis]);
        },
        r);
}

std::string surface_name(const SceneSpec& scene, int id) {
    const int obstacle = id / kRoomFaceCount - 1;
    const char* face = kFaceNames[id % kRoomFaceCount];
    if (obstacle < 0) return face;
    return "obstacle:" + scene.obstacles[obstacle].name + ":" + face;
}

}  // namespace

SceneSpec parse_scene(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw InvalidArgument(std::string("scene config: ") + e.what());
    }

    SceneSpec scene = SceneSpec::default_scene();
    scene.obstacles.clear();
    scene.patches.clear();

    // Patches may name obstacles, so resolve them after everything else.
    std::vector<std::pair<std::string, const pt::ptree*>> patch_sections;
    for (const auto& [section, body] : tree) {
        if (section == "room") {
            if (auto v = body.get_optional<std::string>("min")) scene.room.min = vec3(*v, "room.min");
            if (auto v = body.get_optional<std::string>("max")) scene.room.max = vec3(*v, "room.max");
        } else if (section == "faces") {
            for (const auto& [key, value] : body) {
                bool known = false;
                for (int f = 0; f < kRoomFaceCount; ++f) {
                    if (key == kFaceNames[f]) {
                        scene.faces[f] = parse_radiance(value.data(), "faces." + key);
                        known = true;
                    }
                }
                if (!known) throw InvalidArgument("faces: unknown face '" + key + "'");
            }
        } else if (section.rfind("obstacle:", 0) == 0) {
            Obstacle o;
            o.name = section.substr(9);
            o.box.min = vec3(body.get<std::string>("min", ""), section + ".min");
            o.box.max = vec3(body.get<std::string>("max", ""), section + ".max");
            o.radiance = parse_radiance(body.get<std::string>("radiance", "solid 0.5 0.5 0.5"),
                                        section + ".radiance");
            scene.obstacles.push_back(std::move(o));
        } else if (section.rfind("patch:", 0) == 0) {
            patch_sections.emplace_back(section, &body);
        } else {
            throw InvalidArgument("scene config: unknown section '" + section + "'");
        }
    }
    for (const auto& [section, body] : patch_sections) {
        EmissivePatch p;
        p.surface_id = parse_surface(body->get<std::string>("surface", ""), scene);
        const auto lo = numbers(body->get<std::string>("min", ""), section + ".min");
        const auto hi = numbers(body->get<std::string>("max", ""), section + ".max");
        const auto c = numbers(body->get<std::string>("rgb", ""), section + ".rgb");
        if (lo.size() != 2 || hi.size() != 2 || c.size() != 3)
            throw InvalidArgument(section + ": expected min/max with 2 numbers and rgb with 3");
        p.min = {lo[0], lo[1]};
        p.max = {hi[0], hi[1]};
        p.rgb = color(c, 0);
        scene.patches.push_back(p);
    }
    scene.validate();
    return scene;
}

SceneSpec load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open scene file: " + path);
    return parse_scene(in);
}

void write_scene(std::ostream& out, const SceneSpec& scene) {
    const auto v3 = [](const Vec3d& v) { return fmt::format("{} {} {}", v.x(), v.y(), v.z()); };
    out << "[room]\n"
        << "min = " << v3(scene.room.min) << "\n"
        << "max = " << v3(scene.room.max) << "\n\n[faces]\n";
    for (int f = 0; f < kRoomFaceCount; ++f)
        out << kFaceNames[f] << " = " << format_radiance(scene.faces[f]) << "\n";
    for (const auto& o : scene.obstacles) {
        out << "\n[obstacle:" << o.name << "]\n"
            << "min = " << v3(o.box.min) << "\n"
            << "max = " << v3(o.box.max) << "\n"
            << "radiance = " << format_radiance(o.radiance) << "\n";
    }
    for (std::size_t i = 0; i < scene.patches.size(); ++i) {
        const auto& p = scene.patches[i];
        out << "\n[patch:" << i << "]\n"
            << "surface = " << surface_name(scene, p.surface_id) << "\n"
            << fmt::format("min = {} {}\nmax = {} {}\n", p.min.x(), p.min.y(), p.max.x(), p.max.y())
            << "rgb = " << format_color(p.rgb) << "\n";
    }
}

}  // namespace sctx
