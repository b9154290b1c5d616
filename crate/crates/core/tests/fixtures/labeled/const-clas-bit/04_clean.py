from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

a = QuantumRegister(1, "a")
b = QuantumRegister(1, "b")
c = ClassicalRegister(2, "c")
qc = QuantumCircuit(a, b, c)
qc.h(a[0])
qc.reset(b[0])
qc.measure(a[0], c[0])
qc.measure(b[0], c[1])
