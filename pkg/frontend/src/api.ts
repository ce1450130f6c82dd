// Thin typed client for the annotation server. The fetch function is
// injectable so tests can script responses or record traffic.

import type {
  AgreementReport,
  AnnotationSubmission,
  AnnotationTask,
  Progress,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, public status: number | null = null) {
    super(message);
    this.name = 'ApiError';
  }
}

export class ApiClient {
  private fetchFn: FetchLike;

  constructor(private baseUrl: string = '', fetchFn?: FetchLike) {
    // bind so a bare global fetch keeps its expected receiver
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`server unreachable: ${String(err)}`);
    }
    return response;
  }

  /** Next unannotated pair for this annotator, or null when done. */
  async nextTask(annotator: string): Promise<AnnotationTask | null> {
    const response = await this.request(
      `/api/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    );
    if (response.status === 204) return null;
    if (!response.ok) {
      throw new ApiError(`next task failed (${response.status})`, response.status);
    }
    return (await response.json()) as AnnotationTask;
  }

  async submit(annotation: AnnotationSubmission): Promise<void> {
    const response = await this.request('/api/annotations', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(annotation),
    });
    if (response.status !== 201) {
      throw new ApiError(`submit failed (${response.status})`, response.status);
    }
  }

  async progress(annotator: string): Promise<Progress> {
    const response = await this.request(
      `/api/progress?annotator=${encodeURIComponent(annotator)}`,
    );
    if (!response.ok) {
      throw new ApiError(`progress failed (${response.status})`, response.status);
    }
    return (await response.json()) as Progress;
  }

  async agreement(): Promise<AgreementReport> {
    const response = await this.request('/api/agreement');
    if (!response.ok) {
      throw new ApiError(`agreement failed (${response.status})`, response.status);
    }
    return (await response.json()) as AgreementReport;
  }
}
