/**
 * Campaign store: the single place UI actions go through.
 *
 * Every mutation sends the last seen state hash as an optimistic-lock token
 * and refreshes the local snapshot from the server's response, so the store
 * never drifts from the service and never computes campaign state locally.
 */
import { ApiError, } from "./api.js";
import { validateBatch } from "./validate.js";
export class CampaignStore {
    api;
    document = null;
    lastPropose = null;
    metrics = null;
    rmseHistory = [];
    busy = false;
    error = null;
    listeners = [];
    constructor(api) {
        this.api = api;
    }
    subscribe(listener) {
        this.listeners.push(listener);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== listener);
        };
    }
    notify() {
        for (const listener of this.listeners)
            listener();
    }
    async run(action) {
        this.busy = true;
        this.error = null;
        this.notify();
        try {
            return await action();
        }
        catch (err) {
            this.error = err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
            this.notify();
            throw err;
        }
        finally {
            this.busy = false;
            this.notify();
        }
    }
    get stateHash() {
        return this.document?.state_hash;
    }
    get campaignId() {
        const id = this.document?.id;
        if (!id)
            throw new Error("no campaign loaded");
        return id;
    }
    async create(config, initialDesign) {
        await this.run(async () => {
            this.document = await this.api.createCampaign(config, initialDesign);
        });
    }
    async load(id) {
        await this.run(async () => {
            this.document = await this.api.getCampaign(id);
        });
    }
    /** Validate locally first; invalid batches never produce a request. */
    validatePending(rows) {
        return validateBatch(rows, this.document?.state.pending ?? []);
    }
    async recordMeasurements(rows) {
        const issues = this.validatePending(rows);
        if (issues.length > 0)
            return issues;
        await this.run(async () => {
            this.document = await this.api.postMeasurements(this.campaignId, rows, this.stateHash);
        });
        return [];
    }
    get canPropose() {
        return this.document?.status === "ready_to_propose" && !this.busy;
    }
    async propose() {
        return this.run(async () => {
            const { job_id } = await this.api.startPropose(this.campaignId, this.stateHash);
            const result = await this.api.pollJob(job_id);
            this.lastPropose = result;
            this.document = await this.api.getCampaign(this.campaignId);
            return result;
        });
    }
    async assess(options = {}) {
        return this.run(async () => {
            const { job_id } = await this.api.startAssess(this.campaignId, options);
            const metrics = await this.api.pollJob(job_id);
            this.metrics = metrics;
            const size = this.document?.state.records.length ?? 0;
            if (!this.rmseHistory.some((h) => h.size === size)) {
                this.rmseHistory.push({ size, rmse: metrics.rmse });
                this.rmseHistory.sort((a, b) => a.size - b.size);
            }
            return metrics;
        });
    }
    timeline() {
        const doc = this.document;
        if (!doc)
            return [];
        const sizesByIteration = new Map();
        for (const record of doc.state.records) {
            sizesByIteration.set(record.iteration, (sizesByIteration.get(record.iteration) ?? 0) + 1);
        }
        let running = sizesByIteration.get(0) ?? 0;
        return doc.state.reports.map((report) => {
            const batch = report.batch.length;
            running += sizesByIteration.get(report.iteration + 1) ?? 0;
            return {
                iteration: report.iteration,
                size: running,
                value: Number(report["criterion_value"]),
                batch,
            };
        });
    }
}
