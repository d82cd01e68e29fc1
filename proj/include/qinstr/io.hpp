#pragma once

// JSON serialization for the library types, all in double precision. Matrix
// literals are arrays of rows with [re, im] entries; labels are bare atoms
// when the tuple has one component and arrays of atoms otherwise. Numbers
// are emitted in shortest round-trip form, so load(save(x)) == x exactly.

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qinstr/conservation.hpp"
#include "qinstr/errors.hpp"
#include "qinstr/instrument.hpp"
#include "qinstr/operator_core.hpp"
#include "qinstr/outcome_kernel.hpp"
#include "qinstr/povm.hpp"

namespace qinstr {

using Json = nlohmann::json;

namespace detail {

inline const Json& require(const Json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(std::string(what) + ": missing key \"" + key + "\"");
    }
    return j.at(key);
}

} // namespace detail

inline Json matrix_to_json(const MatrixC<double>& a) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            row.push_back({a(r, c).real(), a(r, c).imag()});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline MatrixC<double> matrix_from_json(const Json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("matrix literal: expected a nonempty array of rows");
    const std::size_t n_rows = j.size();
    const std::size_t n_cols = j[0].is_array() ? j[0].size() : 0;
    if (n_cols == 0) throw ParseError("matrix literal: rows must be nonempty arrays");
    MatrixC<double> a(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (!j[r].is_array() || j[r].size() != n_cols) {
            throw ParseError("matrix literal: ragged rows");
        }
        for (std::size_t c = 0; c < n_cols; ++c) {
            const Json& e = j[r][c];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                throw ParseError("matrix literal: entries must be [re, im] pairs");
            }
            a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                std::complex<double>(e[0].get<double>(), e[1].get<double>());
        }
    }
    return a;
}

inline Json atom_to_json(const Atom& a) {
    if (std::holds_alternative<std::int64_t>(a)) return std::get<std::int64_t>(a);
    return std::get<std::string>(a);
}

inline Atom atom_from_json(const Json& j) {
    if (j.is_number_integer()) return Atom{j.get<std::int64_t>()};
    if (j.is_string()) return Atom{j.get<std::string>()};
    throw ParseError("label atom: expected an integer or a string, got " + j.dump());
}

inline Json label_to_json(const Label& l) {
    if (l.size() == 1) return atom_to_json(l[0]);
    Json arr = Json::array();
    for (const Atom& a : l) arr.push_back(atom_to_json(a));
    return arr;
}

inline Label label_from_json(const Json& j) {
    if (!j.is_array()) return Label{atom_from_json(j)};
    Label l;
    l.reserve(j.size());
    for (const Json& a : j) l.push_back(atom_from_json(a));
    return l;
}

inline Json space_to_json(const OutcomeSpace& space) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < space.size(); ++i) arr.push_back(label_to_json(space.label(i)));
    return arr;
}

inline OutcomeSpace space_from_json(const Json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("labels: expected a nonempty array");
    std::vector<Label> labels;
    labels.reserve(j.size());
    for (const Json& l : j) labels.push_back(label_from_json(l));
    return OutcomeSpace(std::move(labels));
}

inline Json povm_to_json(const Povm<double>& e) {
    Json j;
    j["labels"] = space_to_json(e.space);
    j["dim"] = e.dim;
    Json effects = Json::array();
    for (const MatrixC<double>& op : e.effects) effects.push_back(matrix_to_json(op));
    j["effects"] = std::move(effects);
    return j;
}

inline Povm<double> povm_from_json(const Json& j) {
    OutcomeSpace space = space_from_json(detail::require(j, "labels", "POVM file"));
    const Json& dim_j = detail::require(j, "dim", "POVM file");
    if (!dim_j.is_number_integer() || dim_j.get<std::int64_t>() < 1) {
        throw ParseError("POVM file: dim must be a positive integer");
    }
    const Json& effects_j = detail::require(j, "effects", "POVM file");
    if (!effects_j.is_array()) throw ParseError("POVM file: effects must be an array");
    std::vector<MatrixC<double>> effects;
    effects.reserve(effects_j.size());
    for (const Json& m : effects_j) effects.push_back(matrix_from_json(m));
    Povm<double> e(std::move(space), std::move(effects));
    if (e.dim != dim_j.get<Eigen::Index>()) {
        throw ValidationError("POVM file: dim does not match effect matrices");
    }
    return e;
}

inline Json instrument_to_json(const Instrument<double>& ins) {
    Json j;
    j["labels"] = space_to_json(ins.space);
    j["dim"] = ins.dim;
    Json kraus = Json::array();
    for (const auto& list : ins.kraus) {
        Json ops = Json::array();
        for (const MatrixC<double>& k : list) ops.push_back(matrix_to_json(k));
        kraus.push_back(std::move(ops));
    }
    j["kraus"] = std::move(kraus);
    return j;
}

inline Instrument<double> instrument_from_json(const Json& j) {
    OutcomeSpace space = space_from_json(detail::require(j, "labels", "instrument file"));
    const Json& dim_j = detail::require(j, "dim", "instrument file");
    if (!dim_j.is_number_integer() || dim_j.get<std::int64_t>() < 1) {
        throw ParseError("instrument file: dim must be a positive integer");
    }
    const Json& kraus_j = detail::require(j, "kraus", "instrument file");
    if (!kraus_j.is_array()) throw ParseError("instrument file: kraus must be an array");
    std::vector<std::vector<MatrixC<double>>> kraus;
    kraus.reserve(kraus_j.size());
    for (const Json& list : kraus_j) {
        if (!list.is_array()) throw ParseError("instrument file: per-outcome kraus must be arrays");
        std::vector<MatrixC<double>> ops;
        ops.reserve(list.size());
        for (const Json& m : list) ops.push_back(matrix_from_json(m));
        kraus.push_back(std::move(ops));
    }
    Instrument<double> ins(std::move(space), std::move(kraus));
    if (ins.dim != dim_j.get<Eigen::Index>()) {
        throw ValidationError("instrument file: dim does not match Kraus matrices");
    }
    return ins;
}

inline Json kernel_to_json(const MarkovKernel<double>& nu) {
    Json j;
    j["source"] = space_to_json(nu.source());
    j["target"] = space_to_json(nu.target());
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < nu.source().size(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < nu.target().size(); ++k) row.push_back(nu(i, k));
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j;
}

inline MarkovKernel<double> kernel_from_json(const Json& j) {
    OutcomeSpace source = space_from_json(detail::require(j, "source", "kernel file"));
    OutcomeSpace target = space_from_json(detail::require(j, "target", "kernel file"));
    const Json& rows_j = detail::require(j, "rows", "kernel file");
    if (!rows_j.is_array() || rows_j.size() != static_cast<std::size_t>(source.size())) {
        throw ParseError("kernel file: rows must be one array per source label");
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> rows(source.size(), target.size());
    for (std::size_t i = 0; i < rows_j.size(); ++i) {
        const Json& row = rows_j[i];
        if (!row.is_array() || row.size() != static_cast<std::size_t>(target.size())) {
            throw ParseError("kernel file: row length must match target labels");
        }
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (!row[k].is_number()) throw ParseError("kernel file: entries must be numbers");
            rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
        }
    }
    return MarkovKernel<double>(std::move(source), std::move(target), std::move(rows));
}

inline Json certificate_to_json(const PreorderCertificate<double>& cert) {
    Json j;
    j["feasible"] = cert.feasible;
    j["residual"] = cert.residual;
    j["bound"] = to_string(cert.bound);
    j["lp_iterations"] = cert.lp_iterations;
    if (cert.kernel) j["kernel"] = kernel_to_json(*cert.kernel);
    return j;
}

inline PreorderCertificate<double> certificate_from_json(const Json& j) {
    PreorderCertificate<double> cert;
    cert.feasible = detail::require(j, "feasible", "certificate file").get<bool>();
    cert.residual = detail::require(j, "residual", "certificate file").get<double>();
    const std::string bound = detail::require(j, "bound", "certificate file").get<std::string>();
    if (bound == "exact") {
        cert.bound = BoundKind::Exact;
    } else if (bound == "lower") {
        cert.bound = BoundKind::Lower;
    } else if (bound == "upper") {
        cert.bound = BoundKind::Upper;
    } else {
        throw ParseError("certificate file: unknown bound kind \"" + bound + "\"");
    }
    if (j.contains("lp_iterations")) cert.lp_iterations = j.at("lp_iterations").get<std::int64_t>();
    if (j.contains("kernel")) cert.kernel = kernel_from_json(j.at("kernel"));
    return cert;
}

inline Json conservation_to_json(const ConservationReport<double>& report) {
    Json j;
    j["conserved"] = report.conserved;
    j["residual_forward"] = report.cert_forward.residual;
    j["residual_backward"] = report.cert_backward.residual;
    j["cert_forward"] = certificate_to_json(report.cert_forward);
    j["cert_backward"] = certificate_to_json(report.cert_backward);
    j["composed"] = povm_to_json(report.composed);
    return j;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed for " + path);
}

} // namespace qinstr
