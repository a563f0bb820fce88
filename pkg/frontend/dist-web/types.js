/** JSON contracts of the prediction service API. */
export {};
