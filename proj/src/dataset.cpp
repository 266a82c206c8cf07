#include "repshift/dataset.hpp"

#include "repshift/errors.hpp"

#include <cmath>

namespace repshift {

RepeatedDataset::RepeatedDataset(int d, std::vector<Subject> subjects) : d_(d) {
    subjects_.reserve(subjects.size());
    for (auto& s : subjects) add(std::move(s));
}

void RepeatedDataset::check_subject(const Subject& s) const {
    if (s.x.rows() != d_)
        throw ShapeError("subject '" + s.id + "' has dimension " + std::to_string(s.x.rows()) + ", expected " +
                         std::to_string(d_));
    if (s.y.size() != 0 && s.y.size() != s.x.cols())
        throw ShapeError("subject '" + s.id + "' has " + std::to_string(s.x.cols()) + " covariate rows but " +
                         std::to_string(s.y.size()) + " responses");
}

void RepeatedDataset::add(Subject s) {
    check_subject(s);
    subjects_.push_back(std::move(s));
}

Eigen::Index RepeatedDataset::num_observations() const {
    Eigen::Index n = 0;
    for (const auto& s : subjects_) n += s.num_observations();
    return n;
}

bool RepeatedDataset::has_responses() const {
    if (subjects_.empty()) return false;
    for (const auto& s : subjects_)
        if (!s.has_responses() && s.num_observations() > 0) return false;
    return true;
}

Eigen::MatrixXd RepeatedDataset::covariates() const {
    Eigen::MatrixXd out(d_, num_observations());
    Eigen::Index col = 0;
    for (const auto& s : subjects_) {
        out.middleCols(col, s.x.cols()) = s.x;
        col += s.x.cols();
    }
    return out;
}

Eigen::VectorXd RepeatedDataset::responses() const {
    if (!has_responses()) throw ContractError("dataset has no responses");
    Eigen::VectorXd out(num_observations());
    Eigen::Index pos = 0;
    for (const auto& s : subjects_) {
        out.segment(pos, s.y.size()) = s.y;
        pos += s.y.size();
    }
    return out;
}

void RepeatedDataset::check_unit_cube() const {
    for (const auto& s : subjects_) {
        if (!s.x.allFinite() || (s.x.array() < 0.0).any() || (s.x.array() > 1.0).any())
            throw DomainError("subject '" + s.id + "' has covariates outside [0,1]^d");
    }
}

RepeatedDataset RepeatedDataset::subset(const std::vector<std::size_t>& indices) const {
    RepeatedDataset out(d_);
    out.subjects_.reserve(indices.size());
    for (auto i : indices) out.subjects_.push_back(subjects_.at(i));
    return out;
}

}  // namespace repshift
