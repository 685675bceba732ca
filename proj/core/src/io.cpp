#include "sfe/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace sfe {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& text, const std::string& path, std::size_t line_no) {
    try {
        std::size_t consumed = 0;
        const double value = std::stod(text, &consumed);
        if (consumed != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(line_no) + ": cannot parse number '" +
                      text + "'");
    }
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_for_read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in = open_for_read(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& err) {
        throw IoError("cannot parse '" + path + "': " + err.what());
    }
}

}  // namespace

std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

void write_dataset_csv(const std::string& path, const std::vector<Observation>& dataset,
                       const MarketConfig& config) {
    config.validate();
    std::ofstream out = open_for_write(path);
    out << "obs_id,Q,xi,supplier,alpha,R,P,marginal\n";
    for (std::size_t j = 0; j < dataset.size(); ++j) {
        const Observation& obs = dataset[j];
        obs.validate(config);
        if (!obs.price || !obs.dispatch)
            throw std::invalid_argument(
                "write_dataset_csv: observation " + std::to_string(j) +
                " lacks price/dispatch; the CSV schema requires them");
        for (int i = 0; i < config.n_suppliers; ++i) {
            const bool marginal =
                std::find(obs.marginal_set.begin(), obs.marginal_set.end(), i) !=
                obs.marginal_set.end();
            out << j << ',' << format_double(obs.demand) << ','
                << format_double(obs.fuel_price) << ',' << i << ','
                << format_double(obs.bids[i]) << ',' << format_double(*obs.price) << ','
                << format_double((*obs.dispatch)[i]) << ',' << (marginal ? 1 : 0) << '\n';
        }
    }
    if (!out) throw IoError("error while writing '" + path + "'");
}

std::vector<Observation> read_dataset_csv(const std::string& path,
                                          const MarketConfig& config) {
    config.validate();
    std::ifstream in = open_for_read(path);
    std::string line;
    if (!std::getline(in, line) || line != "obs_id,Q,xi,supplier,alpha,R,P,marginal")
        throw IoError(path + ": missing or malformed dataset header");

    std::map<long long, Observation> by_id;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 8)
            throw IoError(path + ":" + std::to_string(line_no) + ": expected 8 fields, got " +
                          std::to_string(f.size()));
        const long long obs_id = static_cast<long long>(parse_double(f[0], path, line_no));
        const double q = parse_double(f[1], path, line_no);
        const double xi = parse_double(f[2], path, line_no);
        const int supplier = static_cast<int>(parse_double(f[3], path, line_no));
        const double alpha = parse_double(f[4], path, line_no);
        const double price = parse_double(f[5], path, line_no);
        const double dispatch = parse_double(f[6], path, line_no);
        const int marginal = static_cast<int>(parse_double(f[7], path, line_no));
        if (supplier < 0 || supplier >= config.n_suppliers)
            throw IoError(path + ":" + std::to_string(line_no) + ": supplier index " +
                          std::to_string(supplier) + " out of range");

        Observation& obs = by_id[obs_id];
        if (obs.bids.empty()) {
            obs.demand = q;
            obs.fuel_price = xi;
            obs.bids.assign(config.n_suppliers, 0.0);
            obs.price = price;
            obs.dispatch = std::vector<double>(config.n_suppliers, 0.0);
        }
        (*obs.dispatch)[supplier] = dispatch;
        if (marginal != 0) {
            const double recovered = recover_bids(price, dispatch, config.beta[supplier]);
            if (std::fabs(recovered - alpha) > 1e-6 * std::max(1.0, std::fabs(price)))
                throw IoError(path + ":" + std::to_string(line_no) +
                              ": alpha column disagrees with R - beta*P for supplier " +
                              std::to_string(supplier));
            obs.bids[supplier] = recovered;
            obs.marginal_set.push_back(supplier);
        } else {
            obs.bids[supplier] = alpha;
        }
    }

    std::vector<Observation> dataset;
    dataset.reserve(by_id.size());
    for (auto& [id, obs] : by_id) {
        std::sort(obs.marginal_set.begin(), obs.marginal_set.end());
        obs.validate(config);
        dataset.push_back(std::move(obs));
    }
    return dataset;
}

void write_truth_json(const std::string& path, const GroundTruth& truth) {
    truth.config.validate();
    nlohmann::json j;
    j["n"] = truth.config.n_suppliers;
    j["theta1"] = nlohmann::json::array();
    j["theta2"] = nlohmann::json::array();
    for (const CostParams& theta : truth.thetas) {
        j["theta1"].push_back(theta.theta1);
        j["theta2"].push_back(theta.theta2);
    }
    j["beta"] = truth.config.beta;
    j["alpha_bar"] = truth.config.alpha_bar;
    std::ofstream out = open_for_write(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("error while writing '" + path + "'");
}

GroundTruth read_truth_json(const std::string& path) {
    const nlohmann::json j = load_json(path);
    GroundTruth truth;
    try {
        truth.config.n_suppliers = j.at("n").get<int>();
        truth.config.beta = j.at("beta").get<std::vector<double>>();
        truth.config.alpha_bar = j.at("alpha_bar").get<double>();
        const auto theta1 = j.at("theta1").get<std::vector<double>>();
        const auto theta2 = j.at("theta2").get<std::vector<double>>();
        if (theta1.size() != theta2.size() ||
            theta1.size() != static_cast<std::size_t>(truth.config.n_suppliers))
            throw IoError(path + ": theta arrays must have length n");
        for (std::size_t i = 0; i < theta1.size(); ++i)
            truth.thetas.push_back({theta1[i], theta2[i]});
    } catch (const nlohmann::json::exception& err) {
        throw IoError(path + ": " + err.what());
    }
    truth.config.p_min.assign(truth.config.n_suppliers, 0.0);
    truth.config.p_max.assign(truth.config.n_suppliers,
                              std::numeric_limits<double>::infinity());
    truth.config.validate();
    return truth;
}

void write_thetas_json(const std::string& path, const std::vector<CostParams>& thetas,
                       double z, double best_discrepancy) {
    nlohmann::json j;
    j["n"] = thetas.size();
    j["theta1"] = nlohmann::json::array();
    j["theta2"] = nlohmann::json::array();
    for (const CostParams& theta : thetas) {
        j["theta1"].push_back(theta.theta1);
        j["theta2"].push_back(theta.theta2);
    }
    j["z"] = z;
    j["best_discrepancy"] = best_discrepancy;
    std::ofstream out = open_for_write(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("error while writing '" + path + "'");
}

std::vector<CostParams> read_thetas_json(const std::string& path) {
    const nlohmann::json j = load_json(path);
    std::vector<CostParams> thetas;
    try {
        const auto theta1 = j.at("theta1").get<std::vector<double>>();
        const auto theta2 = j.at("theta2").get<std::vector<double>>();
        if (theta1.size() != theta2.size())
            throw IoError(path + ": theta arrays must have equal length");
        for (std::size_t i = 0; i < theta1.size(); ++i)
            thetas.push_back({theta1[i], theta2[i]});
    } catch (const nlohmann::json::exception& err) {
        throw IoError(path + ": " + err.what());
    }
    return thetas;
}

void write_iteration_log_csv(const std::string& path, const SearchResult& result) {
    std::ofstream out = open_for_write(path);
    out << "iter,z,discrepancy,mape,seconds\n";
    for (const IterationRecord& rec : result.log) {
        out << rec.iter << ',' << format_double(rec.z) << ','
            << format_double(rec.discrepancy) << ',';
        if (rec.mape) out << format_double(*rec.mape);
        out << ',' << format_double(rec.seconds) << '\n';
    }
    if (!out) throw IoError("error while writing '" + path + "'");
}

}  // namespace sfe
