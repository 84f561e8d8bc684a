/**
 * DOM wiring for the campaign dashboard.
 *
 * The page has four areas: campaign header and timeline, measurement entry
 * for the pending batch, the proposed-batch table with distance annotations,
 * and the diagnostic charts (uncertainty curves, T-x-y diagram, prediction
 * error vs design size).  All numbers rendered come straight from API
 * payloads through the 6-significant-digit formatter.
 */
import { ApiClient } from "./api.js";
import { rmseHistorySvg, sigmaCurveSvg, txySvg } from "./charts.js";
import { sig6 } from "./format.js";
import { CampaignStore } from "./store.js";
function el(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
function renderStatus(store) {
    const doc = store.document;
    el("status").textContent = doc
        ? `campaign ${doc.id} — ${doc.status} — ${doc.state.records.length} experiments`
        : "no campaign loaded";
    el("banner").textContent = store.error ?? (store.busy ? "working…" : "");
    (el("propose")).disabled = !store.canPropose;
    (el("assess")).disabled = !doc || doc.state.records.length === 0 || store.busy;
}
function renderPending(store) {
    const pending = store.document?.state.pending ?? [];
    const tbody = el("pending-rows");
    tbody.innerHTML = "";
    pending.forEach((point, i) => {
        const row = document.createElement("tr");
        row.innerHTML =
            `<td>${sig6(point[0] ?? 0)}</td><td>${sig6(point[1] ?? 0)}</td>` +
                `<td><input data-row="${i}" data-field="l_actual" value="${sig6(point[0] ?? 0)}"></td>` +
                `<td><input data-row="${i}" data-field="P_actual" value="${sig6(point[1] ?? 0)}"></td>` +
                `<td><input data-row="${i}" data-field="v" placeholder="vapor fraction"></td>` +
                `<td><input data-row="${i}" data-field="T" placeholder="temperature K"></td>`;
        tbody.appendChild(row);
    });
    el("record-section").style.display = pending.length ? "block" : "none";
}
function collectRows(store) {
    const pending = store.document?.state.pending ?? [];
    return pending.map((point, i) => {
        const read = (field) => {
            const input = document.querySelector(`input[data-row="${i}"][data-field="${field}"]`);
            return input ? Number(input.value) : NaN;
        };
        return {
            design_label: `iteration-${store.document?.state.iteration ?? 0}`,
            l_planned: point[0] ?? NaN,
            P_planned: point[1] ?? NaN,
            l_actual: read("l_actual"),
            P_actual: read("P_actual"),
            v: read("v"),
            T: read("T"),
        };
    });
}
function renderProposed(store) {
    const result = store.lastPropose;
    const tbody = el("proposed-rows");
    tbody.innerHTML = "";
    if (!result)
        return;
    result.batch.forEach((point, i) => {
        const row = document.createElement("tr");
        row.innerHTML =
            `<td>${sig6(point[0] ?? 0)}</td><td>${sig6(point[1] ?? 0)}</td>` +
                `<td>${sig6(result.batch_distances[i] ?? 0)}</td>`;
        tbody.appendChild(row);
    });
    el("solve-summary").textContent =
        `criterion ${sig6(result.report.criterion_value)}, ` +
            `certificate ${sig6(result.report.min_sensitivity)} (eps ${sig6(result.report.epsilon)}), ` +
            `${result.report.iterations} refinements, status ${result.status}`;
}
function renderTimeline(store) {
    const tbody = el("timeline-rows");
    tbody.innerHTML = "";
    for (const step of store.timeline()) {
        const row = document.createElement("tr");
        row.innerHTML =
            `<td>${step.iteration}</td><td>${step.size}</td>` +
                `<td>${step.batch}</td><td>${sig6(step.value)}</td>`;
        tbody.appendChild(row);
    }
}
function renderCharts(store) {
    if (store.metrics) {
        const reports = [{ name: "current design", report: store.metrics.lin }];
        if (store.metrics.sam)
            reports.push({ name: "sampling", report: store.metrics.sam });
        el("sigma-v-chart").innerHTML = sigmaCurveSvg(reports, 0);
        el("sigma-T-chart").innerHTML = sigmaCurveSvg(reports, 1);
    }
    if (store.rmseHistory.length) {
        el("rmse-chart").innerHTML = rmseHistorySvg(store.rmseHistory);
    }
}
export function mount(base = "") {
    const api = new ApiClient(base);
    const store = new CampaignStore(api);
    const rerender = () => {
        renderStatus(store);
        renderPending(store);
        renderProposed(store);
        renderTimeline(store);
        renderCharts(store);
    };
    store.subscribe(rerender);
    el("load").addEventListener("click", () => {
        const id = el("campaign-id").value.trim();
        if (id)
            void store.load(id).catch(() => undefined);
    });
    el("record").addEventListener("click", () => {
        const rows = collectRows(store);
        const issues = store.validatePending(rows);
        if (issues.length > 0) {
            el("banner").textContent = issues
                .map((issue) => `row ${issue.row + 1} ${issue.field}: ${issue.message}`)
                .join("; ");
            return; // invalid input: no request leaves the page
        }
        void store.recordMeasurements(rows).catch(() => undefined);
    });
    el("propose").addEventListener("click", () => {
        void store.propose().catch(() => undefined);
    });
    el("assess").addEventListener("click", () => {
        void store.assess().catch(() => undefined);
    });
    el("txy").addEventListener("click", () => {
        const pressure = Number(el("txy-pressure").value) * 1e5;
        void api
            .predictionCurves(store.campaignId, pressure)
            .then((curves) => {
            el("txy-chart").innerHTML = txySvg(curves);
        })
            .catch((err) => {
            el("banner").textContent = String(err);
        });
    });
    rerender();
    return store;
}
