/**
 * Typed client for the campaign HTTP API.
 *
 * Every mutation carries the optimistic-lock token (the server's state hash)
 * so concurrent edits surface as 409 conflicts instead of silent overwrites.
 */
export class ApiError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
async function parseError(response) {
    let message = `${response.status}`;
    try {
        const body = (await response.json());
        if (body.error)
            message = body.error;
    }
    catch {
        /* non-JSON error body */
    }
    throw new ApiError(response.status, message);
}
export class ApiClient {
    base;
    fetchImpl;
    constructor(base, fetchImpl = fetch) {
        this.base = base;
        this.fetchImpl = fetchImpl;
    }
    async request(method, path, body) {
        const response = await this.fetchImpl(this.base + path, {
            method,
            headers: body === undefined ? {} : { "Content-Type": "application/json" },
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        if (!response.ok)
            await parseError(response);
        return (await response.json());
    }
    createCampaign(config, initialDesign) {
        return this.request("POST", "/campaigns", { config, initial_design: initialDesign });
    }
    getCampaign(id) {
        return this.request("GET", `/campaigns/${id}`);
    }
    postMeasurements(id, records, stateHash) {
        return this.request("POST", `/campaigns/${id}/measurements`, {
            records,
            state_hash: stateHash,
        });
    }
    startPropose(id, stateHash) {
        return this.request("POST", `/campaigns/${id}/propose`, { state_hash: stateHash });
    }
    startAssess(id, options = {}) {
        return this.request("POST", `/campaigns/${id}/assess`, options);
    }
    jobStatus(jobId) {
        return this.request("GET", `/jobs/${jobId}`);
    }
    metrics(id) {
        return this.request("GET", `/campaigns/${id}/metrics`);
    }
    predictionCurves(id, pressure, points = 101) {
        return this.request("GET", `/campaigns/${id}/prediction-curves?P=${pressure}&points=${points}`);
    }
    async pollJob(jobId, intervalMs = 250, timeoutMs = 600_000) {
        const deadline = Date.now() + timeoutMs;
        for (;;) {
            const job = await this.jobStatus(jobId);
            if (job.status === "done")
                return job.result;
            if (job.status === "failed")
                throw new ApiError(500, job.error ?? "job failed");
            if (Date.now() > deadline)
                throw new ApiError(504, "job polling timed out");
            await new Promise((resolve) => setTimeout(resolve, intervalMs));
        }
    }
}
