#include <nlohmann/json.hpp>

#include "ladderlab/error.hpp"
#include "ladderlab/geometry.hpp"

namespace ladderlab {

namespace {

using nlohmann::json;

const json& field(const json& j, const char* key, const std::string& where)
{
    require(j.is_object(), ErrorKind::Precondition, where + ": expected an object");
    auto it = j.find(key);
    require(it != j.end(), ErrorKind::Precondition, where + ": missing \"" + key + "\"");
    return *it;
}

template <class T>
T get_as(const json& j, const char* key, const std::string& where)
{
    try {
        return field(j, key, where).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::Precondition, where + "." + key + ": " + e.what());
    }
}

FieldSpec field_from_json(const json& j, const std::string& where)
{
    const auto kind = get_as<std::string>(j, "kind", where);
    if (kind == "constant") return ConstantField{get_as<double>(j, "value", where)};
    if (kind == "cosine") {
        CosineField c;
        c.base = get_as<double>(j, "base", where);
        c.amplitude = get_as<double>(j, "amplitude", where);
        c.axis = j.contains("axis") ? get_as<int>(j, "axis", where) : 0;
        c.wavenumber = j.contains("wavenumber") ? get_as<double>(j, "wavenumber", where) : 1.0;
        return c;
    }
    if (kind == "grid") return GridField{get_as<std::vector<double>>(j, "values", where)};
    fail(ErrorKind::Precondition, where + ": unknown field kind \"" + kind + "\"");
}

json field_to_json(const FieldSpec& spec)
{
    if (const auto* c = std::get_if<ConstantField>(&spec)) return {{"kind", "constant"}, {"value", c->value}};
    if (const auto* c = std::get_if<CosineField>(&spec))
        return {{"kind", "cosine"}, {"base", c->base}, {"amplitude", c->amplitude},
                {"axis", c->axis}, {"wavenumber", c->wavenumber}};
    return {{"kind", "grid"}, {"values", std::get<GridField>(spec).values}};
}

} // namespace

StandardStationaryMetric metric_from_json(const json& j)
{
    const int n = get_as<int>(j, "n", "metric");
    const json& s = field(j, "surface", "metric");
    const auto kind = get_as<std::string>(s, "kind", "surface");

    Surface surface;
    if (kind == "flat_torus") {
        FlatTorus t;
        t.lengths = get_as<std::vector<double>>(s, "lengths", "surface");
        t.resolution = s.contains("resolution") ? get_as<std::vector<int>>(s, "resolution", "surface")
                                                : std::vector<int>(t.lengths.size(), 64);
        surface = t;
    } else if (kind == "gridded_torus") {
        GriddedTorus t;
        t.lengths = get_as<std::vector<double>>(s, "lengths", "surface");
        t.resolution = get_as<std::vector<int>>(s, "resolution", "surface");
        surface = t;
    } else if (kind == "round_sphere") {
        RoundSphere r;
        r.dimension = n - 1;
        r.radius = s.contains("radius") ? get_as<double>(s, "radius", "surface") : 1.0;
        r.resolution = s.contains("resolution") ? get_as<int>(s, "resolution", "surface") : 32;
        surface = r;
    } else {
        fail(ErrorKind::Precondition, "surface: unknown kind \"" + kind + "\"");
    }

    const FieldSpec lapse = field_from_json(field(j, "lapse", "metric"), "lapse");

    std::vector<FieldSpec> shift;
    if (j.contains("shift")) {
        const json& b = j["shift"];
        const auto bkind = get_as<std::string>(b, "kind", "shift");
        if (bkind == "constant") {
            for (double v : get_as<std::vector<double>>(b, "value", "shift")) shift.push_back(ConstantField{v});
        } else if (bkind == "components") {
            const json& comps = field(b, "components", "shift");
            require(comps.is_array(), ErrorKind::Precondition, "shift.components: expected an array");
            for (std::size_t i = 0; i < comps.size(); ++i)
                shift.push_back(field_from_json(comps[i], "shift.components[" + std::to_string(i) + "]"));
        } else {
            require(bkind == "zero", ErrorKind::Precondition, "shift: unknown kind \"" + bkind + "\"");
        }
    }

    SpatialMetricSpec h = IdentityMetric{};
    if (j.contains("h")) {
        const json& hj = j["h"];
        const auto hkind = get_as<std::string>(hj, "kind", "h");
        if (hkind == "constant") {
            const auto rows = get_as<std::vector<std::vector<double>>>(hj, "matrix", "h");
            Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                require(rows[r].size() == rows.size(), ErrorKind::Precondition, "h.matrix must be square");
                for (std::size_t c = 0; c < rows.size(); ++c)
                    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
            h = ConstantMetric{m};
        } else {
            require(hkind == "identity", ErrorKind::Precondition, "h: unknown kind \"" + hkind + "\"");
        }
    }
    return StandardStationaryMetric(n, std::move(surface), lapse, std::move(shift), std::move(h));
}

json metric_to_json(const StandardStationaryMetric& metric)
{
    json j;
    j["n"] = metric.n();
    const Surface& s = metric.surface();
    if (const auto* t = std::get_if<FlatTorus>(&s))
        j["surface"] = {{"kind", "flat_torus"}, {"lengths", t->lengths}, {"resolution", t->resolution}};
    else if (const auto* t = std::get_if<GriddedTorus>(&s))
        j["surface"] = {{"kind", "gridded_torus"}, {"lengths", t->lengths}, {"resolution", t->resolution}};
    else {
        const auto& r = std::get<RoundSphere>(s);
        j["surface"] = {{"kind", "round_sphere"}, {"radius", r.radius}, {"resolution", r.resolution}};
    }
    j["lapse"] = field_to_json(metric.lapse_spec());
    const auto shift = metric.shift_spec();
    if (shift.empty()) {
        j["shift"] = {{"kind", "zero"}};
    } else {
        json comps = json::array();
        for (const auto& c : shift) comps.push_back(field_to_json(c));
        j["shift"] = {{"kind", "components"}, {"components", comps}};
    }
    if (const auto* c = std::get_if<ConstantMetric>(&metric.h_spec())) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < c->matrix.rows(); ++r) {
            std::vector<double> row(c->matrix.cols());
            for (Eigen::Index k = 0; k < c->matrix.cols(); ++k) row[k] = c->matrix(r, k);
            rows.push_back(row);
        }
        j["h"] = {{"kind", "constant"}, {"matrix", rows}};
    } else {
        j["h"] = {{"kind", "identity"}};
    }
    return j;
}

} // namespace ladderlab
