package com.acme.billing;

public class InvoiceFormatter {
    private final String separator;

    public InvoiceFormatter(String separator) {
        this.separator = separator;
    }

    public String format(Invoice invoice) {
        String header = "INVOICE";
        // id and amount only
        return header + separator + invoice.getId() + separator + invoice.getAmount();
    }
}
