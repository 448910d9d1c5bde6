#include "ecgqa/signal_io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ecgqa {

using nlohmann::json;

std::string signal_sidecar_path(const std::string& csv_path) {
    std::filesystem::path p(csv_path);
    p.replace_extension(".json");
    return p.string();
}

void write_signal_csv(const DigitalEcg& signal, const std::string& csv_path) {
    signal.validate();
    std::ofstream out(csv_path);
    if (!out) throw EcgError(ErrorKind::IoError, "cannot write " + csv_path);
    out << "lead,sample_rate_hz,n_samples\n";
    char buf[32];
    for (const auto& [lead, samples] : signal.leads) {
        out << to_string(lead) << ',' << signal.sample_rate_hz << ',' << samples.size();
        for (double v : samples) {
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            out << ',' << buf;
        }
        out << '\n';
    }

    json meta = json::object();
    if (signal.metadata) {
        meta["source_id"] = signal.metadata->source_id;
        meta["scan_date"] = signal.metadata->scan_date;
        meta["target_format"] = signal.metadata->target_format;
    }
    meta["sample_rate_hz"] = signal.sample_rate_hz;
    std::ofstream side(signal_sidecar_path(csv_path));
    if (side) side << meta.dump(2) << '\n';
}

DigitalEcg read_signal_csv(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw EcgError(ErrorKind::IoError, "cannot read " + csv_path);
    std::string line;
    if (!std::getline(in, line))
        throw EcgError(ErrorKind::IoError, "empty signal file " + csv_path);

    DigitalEcg signal;
    bool rate_set = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        if (!std::getline(ss, field, ',')) continue;
        auto lead = lead_from_string(field);
        if (!lead)
            throw EcgError(ErrorKind::IoError, "unknown lead name '" + field + "' in " + csv_path);
        if (!std::getline(ss, field, ','))
            throw EcgError(ErrorKind::IoError, "missing sample rate in " + csv_path);
        const double rate = std::stod(field);
        if (!rate_set) {
            signal.sample_rate_hz = rate;
            rate_set = true;
        } else if (rate != signal.sample_rate_hz) {
            throw EcgError(ErrorKind::IoError, "mixed sample rates in " + csv_path);
        }
        if (!std::getline(ss, field, ','))
            throw EcgError(ErrorKind::IoError, "missing sample count in " + csv_path);
        const std::size_t n = std::stoul(field);
        std::vector<double> samples;
        samples.reserve(n);
        while (std::getline(ss, field, ',')) samples.push_back(std::stod(field));
        if (samples.size() != n)
            throw EcgError(ErrorKind::IoError, "sample count mismatch for lead " +
                                                   std::string(to_string(*lead)));
        signal.leads[*lead] = std::move(samples);
    }

    const std::string side_path = signal_sidecar_path(csv_path);
    std::ifstream side(side_path);
    if (side) {
        json meta = json::parse(side, nullptr, false);
        if (!meta.is_discarded() && meta.is_object() && meta.contains("source_id")) {
            RecordMetadata md;
            md.source_id = meta.value("source_id", "");
            md.scan_date = meta.value("scan_date", "");
            md.target_format = meta.value("target_format", "");
            signal.metadata = md;
        }
    }
    signal.validate();
    return signal;
}

} // namespace ecgqa
