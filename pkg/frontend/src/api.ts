/**
 * Typed client for the campaign HTTP API.
 *
 * Every mutation carries the optimistic-lock token (the server's state hash)
 * so concurrent edits surface as 409 conflicts instead of silent overwrites.
 */

export interface MeasurementRow {
  design_label?: string;
  l_planned: number;
  l_actual: number;
  P_planned: number;
  P_actual: number;
  v: number;
  T: number;
}

export interface SolveSummary {
  criterion_value: number;
  min_sensitivity: number;
  iterations: number;
  epsilon: number;
  support_points: number[][];
  weights: number[];
}

export interface CampaignDocument {
  id: string;
  state_hash: string;
  status: string;
  config: {
    alpha: number;
    epsilon: number;
    max_batch_size: number;
    budget: number;
    progress_tol: number;
    space_points: number[][];
    [key: string]: unknown;
  };
  state: {
    iteration: number;
    records: Array<{
      x_planned: number[];
      x_actual: number[];
      y: number[];
      iteration: number;
      label: string;
    }>;
    pending: number[][];
    estimates: Array<{ iteration: number; theta: number[]; sse: number }>;
    reports: Array<{ iteration: number; batch: number[][]; [key: string]: unknown }>;
    status: string;
    unfunded_batch: number[][];
  };
}

export interface ProposeResult {
  status: string;
  batch: number[][];
  batch_distances: number[];
  unfunded_batch: number[][];
  report: SolveSummary;
  state_hash: string;
}

export interface UncertaintyReport {
  kind: string;
  worst: number[];
  l_values: number[];
  curves: number[][];
  design_size: number;
}

export interface Metrics {
  rmse: number[];
  theta: number[];
  lin: UncertaintyReport;
  sam?: UncertaintyReport;
}

export interface PredictionCurves {
  P: number;
  l: number[];
  v: number[];
  T: number[];
}

export interface Job<T> {
  id: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  result?: T;
  error?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let message = `${response.status}`;
  try {
    const body = (await response.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(response.status, message);
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  createCampaign(config: unknown, initialDesign: number[][]): Promise<CampaignDocument> {
    return this.request("POST", "/campaigns", { config, initial_design: initialDesign });
  }

  getCampaign(id: string): Promise<CampaignDocument> {
    return this.request("GET", `/campaigns/${id}`);
  }

  postMeasurements(
    id: string,
    records: MeasurementRow[],
    stateHash?: string,
  ): Promise<CampaignDocument> {
    return this.request("POST", `/campaigns/${id}/measurements`, {
      records,
      state_hash: stateHash,
    });
  }

  startPropose(id: string, stateHash?: string): Promise<{ job_id: string }> {
    return this.request("POST", `/campaigns/${id}/propose`, { state_hash: stateHash });
  }

  startAssess(
    id: string,
    options: { sampling?: boolean; n_sam?: number; seed?: number } = {},
  ): Promise<{ job_id: string }> {
    return this.request("POST", `/campaigns/${id}/assess`, options);
  }

  jobStatus<T>(jobId: string): Promise<Job<T>> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  metrics(id: string): Promise<Metrics> {
    return this.request("GET", `/campaigns/${id}/metrics`);
  }

  predictionCurves(id: string, pressure: number, points = 101): Promise<PredictionCurves> {
    return this.request(
      "GET",
      `/campaigns/${id}/prediction-curves?P=${pressure}&points=${points}`,
    );
  }

  async pollJob<T>(jobId: string, intervalMs = 250, timeoutMs = 600_000): Promise<T> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.jobStatus<T>(jobId);
      if (job.status === "done") return job.result as T;
      if (job.status === "failed") throw new ApiError(500, job.error ?? "job failed");
      if (Date.now() > deadline) throw new ApiError(504, "job polling timed out");
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
